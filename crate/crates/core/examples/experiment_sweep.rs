//! Run a small method/width sweep from an inline JSON config.

use daonmf::{run_experiment, synth_planted, ExperimentConfig};

fn main() -> daonmf::Result<()> {
    let dir = std::env::temp_dir().join("daonmf_example_sweep");
    synth_planted(4, 20, 30, 0.05, 2)?.save(&dir)?;

    let json = format!(
        r#"{{
            "dataset": "{}",
            "methods": ["nmf", "aonmf", "daonmf", "argmax-daonmf"],
            "k1": 4,
            "k2_sweep": [4, 6],
            "lambdas": [1e-6, 1e-5],
            "seeds": [0, 1],
            "max_iters": 100
        }}"#,
        dir.display()
    );
    let cfg = ExperimentConfig::from_json(&json)?;
    print!("{}", run_experiment(&cfg)?);
    Ok(())
}
