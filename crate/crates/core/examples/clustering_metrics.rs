//! K-means on learned features, scored with ACC and NMI.

use daonmf::clustering::row_argmax;
use daonmf::{kmeans, synth_planted, train, DeepConfig, EvalReport, KMeansConfig, LayerSpec};

fn main() -> daonmf::Result<()> {
    let ds = synth_planted(4, 30, 40, 0.05, 5)?;
    let truth = ds.labels.as_deref().unwrap();
    let spec = LayerSpec::new(vec![8, 10], vec![1e-6, 1e-5])?;
    let model = train(&ds.x, &spec, &DeepConfig::default())?;

    let features = model.h_last().normalize_columns();
    let a = kmeans(&features, &KMeansConfig::new(4, 0))?;

    println!("{}", EvalReport::CSV_HEADER);
    println!("{}", EvalReport::evaluate(&a.labels, truth, 4, "kmeans", 0)?.csv_row());
    println!("{}", EvalReport::evaluate(&row_argmax(&features), truth, 10, "argmax", 0)?.csv_row());

    // ACC ignores label names; NMI is zero for independent partitions
    let shifted: Vec<usize> = truth.iter().map(|&t| (t + 1) % 4).collect();
    println!("relabeled acc {}", daonmf::clustering_accuracy(&shifted, truth)?);
    println!("nmi vs constant {}", daonmf::nmi(&vec![0; truth.len()], truth)?);
    Ok(())
}
