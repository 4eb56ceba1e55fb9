//! Plain NMF with multiplicative updates on a planted low-rank matrix.

use daonmf::{nmf_fit, synth_planted, NmfConfig};

fn main() -> daonmf::Result<()> {
    let ds = synth_planted(4, 25, 40, 0.02, 7)?;
    let mut cfg = NmfConfig::new(4);
    cfg.max_iters = 2000;
    cfg.seed = 1;
    let fit = nmf_fit(&ds.x, &cfg)?;

    let total = 0.5 * ds.x.frobenius_sq();
    println!("X is {}x{}, rank {}", ds.x.rows(), ds.x.cols(), cfg.rank);
    println!("iterations  {}", fit.iters_run);
    println!("cost        {:.4e} -> {:.4e}", fit.cost_trace[0], fit.final_cost());
    println!("explained   {:.2}%", 100.0 * (1.0 - fit.final_cost() / total));
    Ok(())
}
