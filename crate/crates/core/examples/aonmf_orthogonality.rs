//! How the orthogonality penalty trades fit for disjoint columns of H.

use daonmf::{aonmf_fit, clustering::row_argmax, clustering_accuracy, synth_planted, AonmfConfig};

fn main() -> daonmf::Result<()> {
    let ds = synth_planted(5, 20, 50, 0.05, 3)?;
    let truth = ds.labels.as_deref().unwrap();
    println!("{:>8} {:>12} {:>12} {:>8} {:>7}", "lambda", "cost", "ortho", "argmax", "iters");
    for lambda in [0.0, 0.01, 1.0, 100.0, 1e6] {
        let mut cfg = AonmfConfig::new(5, lambda);
        cfg.seed = 2;
        let res = aonmf_fit(&ds.x, &cfg)?;
        let acc = clustering_accuracy(&row_argmax(&res.h), truth)?;
        println!(
            "{lambda:>8.0e} {:>12.4e} {:>12.3e} {acc:>8.3} {:>7}",
            res.cost_trace.last().unwrap(),
            res.ortho_residual,
            res.iters_run
        );
    }
    Ok(())
}
