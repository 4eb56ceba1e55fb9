//! Two-layer model: pretrain, fine-tune, inspect layers and save to disk.

use daonmf::deep::save_model;
use daonmf::{deep_cost, synth_planted, train, DeepConfig, LayerSpec};

fn main() -> daonmf::Result<()> {
    let ds = synth_planted(5, 30, 60, 0.05, 11)?;
    let spec = LayerSpec::new(vec![10, 15], vec![1e-6, 1e-5])?;
    let cfg = DeepConfig { seed: 4, ..DeepConfig::default() };
    let model = train(&ds.x, &spec, &cfg)?;

    println!("depth {}, W1 {:?}", model.depth(), model.w1.shape());
    for (l, h) in model.hs.iter().enumerate() {
        println!("H{} {:?}  ortho mass {:.3e}", l + 1, h.shape(), h.normalize_columns().offdiag_gram_sum());
    }
    let trace = &model.cost_trace;
    println!("fine-tune passes {}", model.iters_run);
    println!("cost {:.5e} -> {:.5e}", trace[0], trace[trace.len() - 1]);
    println!("after normalization {:.5e}", deep_cost(&ds.x, &model)?);

    let dir = std::env::temp_dir().join("daonmf_example_model");
    save_model(&dir, &model, deep_cost(&ds.x, &model)?)?;
    println!("saved to {}", dir.display());
    Ok(())
}
