//! Write a tiny folder-per-class PGM dataset, load it and cluster it.

use std::path::Path;

use daonmf::data::{load_image_dataset, write_pgm, GrayImage};
use daonmf::{aonmf_fit, kmeans, AonmfConfig, EvalReport, KMeansConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIDE: usize = 12;

fn write_classes(root: &Path) -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for class in 0..3 {
        let dir = root.join(format!("s{class:02}"));
        std::fs::create_dir_all(&dir)?;
        for img in 0..8 {
            // each class lights a different band of rows
            let pixels = (0..SIDE * SIDE)
                .map(|p| {
                    let band = (p / SIDE) * 3 / SIDE == class;
                    let base = if band { 200.0 } else { 30.0 };
                    (base + rng.random_range(-20.0..20.0)) as u8
                })
                .collect();
            let image = GrayImage { width: SIDE, height: SIDE, maxval: 255, pixels };
            write_pgm(&dir.join(format!("{img}.pgm")), &image)?;
        }
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::temp_dir().join("daonmf_example_faces");
    let _ = std::fs::remove_dir_all(&root);
    write_classes(&root)?;

    let ds = load_image_dataset(&root, SIDE)?;
    println!("loaded {} images of {} pixels, {} classes", ds.n_samples(), ds.x.rows(), ds.n_classes().unwrap());

    let mut cfg = AonmfConfig::new(3, 1e-3);
    cfg.seed = 1;
    let res = aonmf_fit(&ds.x, &cfg)?;
    let pred = kmeans(&res.h.normalize_columns(), &KMeansConfig::new(3, 0))?.labels;
    let report = EvalReport::evaluate(&pred, ds.labels.as_deref().unwrap(), 3, "aonmf", 1)?;
    println!("{}\n{}", EvalReport::CSV_HEADER, report.csv_row());
    Ok(())
}
