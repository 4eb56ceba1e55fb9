mod common;

use common::*;
use daonmf::clustering::{nmi_with, NmiNorm};
use daonmf::{clustering_accuracy, kmeans, nmi, EvalReport, KMeansConfig, Matrix};
use proptest::prelude::*;
use rand::Rng;

fn labels(max_k: usize, max_n: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (1..=max_k, 1..=max_n).prop_flat_map(|(k, n)| {
        (
            prop::collection::vec(0..k, n),
            prop::collection::vec(0..k, n),
        )
    })
}

/// Hand entropy of a labeling in nats.
fn entropy(l: &[usize]) -> f64 {
    let n = l.len() as f64;
    let k = l.iter().max().unwrap() + 1;
    (0..k)
        .map(|c| l.iter().filter(|&&v| v == c).count() as f64 / n)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

#[test]
fn accuracy_matches_brute_force() {
    let mut rng = rng(31);
    for case in 0..200 {
        let k = 1 + case % 5;
        let n = 1 + rng.random_range(0..10);
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let got = clustering_accuracy(&pred, &truth).unwrap();
        assert!((got - brute_force_acc(&pred, &truth)).abs() < 1e-15, "{pred:?} {truth:?}");
    }
}

#[test]
fn listed_accuracy_examples() {
    assert_eq!(clustering_accuracy(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
    assert!((clustering_accuracy(&[0, 1, 1], &[0, 0, 1]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert!(clustering_accuracy(&[0, 1], &[0]).is_err());
}

#[test]
fn listed_nmi_examples() {
    assert!((nmi(&[0, 0, 1, 1, 2], &[2, 2, 0, 0, 1]).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(nmi(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
    assert!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap().abs() < 1e-12);
    assert_eq!(nmi(&[3, 3, 3], &[1, 1, 1]).unwrap(), 1.0);
}

#[test]
fn nmi_matches_hand_contingency() {
    // pred {0,0,1,1,1,2}, truth {0,0,0,1,1,1}
    let pred = [0, 0, 1, 1, 1, 2];
    let truth = [0, 0, 0, 1, 1, 1];
    let n: f64 = 6.0;
    let joint: [((usize, usize), f64); 4] = [((0, 0), 2.0), ((1, 0), 1.0), ((1, 1), 2.0), ((2, 1), 1.0)];
    let pp: [f64; 3] = [2.0, 3.0, 1.0];
    let pt = [3.0, 3.0];
    let mi: f64 = joint
        .iter()
        .map(|&((a, b), c)| c / n * ((c / n) / ((pp[a] / n) * (pt[b] / n))).ln())
        .sum();
    let want = mi / (entropy(&pred) * entropy(&truth)).sqrt();
    assert!((nmi(&pred, &truth).unwrap() - want).abs() < 1e-12);
    let arith = mi / (0.5 * (entropy(&pred) + entropy(&truth)));
    assert!((nmi_with(&pred, &truth, NmiNorm::Arithmetic).unwrap() - arith).abs() < 1e-12);
}

#[test]
fn kmeans_handles_listed_cases() {
    let pts = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]]).unwrap();
    let a = kmeans(&pts, &KMeansConfig::new(2, 0)).unwrap();
    assert_eq!(a.labels[0], a.labels[1]);
    assert_eq!(a.labels[2], a.labels[3]);
    assert_ne!(a.labels[0], a.labels[2]);
    assert!((a.inertia - 1.0).abs() < 1e-12);

    let b = kmeans(&pts, &KMeansConfig::new(4, 3)).unwrap();
    assert_eq!(b.inertia, 0.0);
    assert!(kmeans(&pts, &KMeansConfig::new(5, 0)).is_err());
}

#[test]
fn kmeans_separates_planted_blobs() {
    for seed in 0..5 {
        let mut rng = rng(40 + seed);
        let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let pts = Matrix::from_fn(150, 2, |i, j| centers[i / 50][j] + rng.random_range(-1.0..1.0));
        let truth: Vec<usize> = (0..150).map(|i| i / 50).collect();
        let a = kmeans(&pts, &KMeansConfig::new(3, seed)).unwrap();
        assert_eq!(clustering_accuracy(&a.labels, &truth).unwrap(), 1.0);
        for w in a.inertia_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }
}

#[test]
fn eval_report_csv_row() {
    let r = EvalReport::evaluate(&[0, 1, 1], &[0, 0, 1], 2, "daonmf", 7).unwrap();
    assert_eq!(EvalReport::CSV_HEADER, "method,k,seed,acc,nmi");
    assert!(r.csv_row().starts_with("daonmf,2,7,0.666667,"));
}

proptest! {
    #[test]
    fn accuracy_is_relabel_invariant((pred, truth) in labels(5, 10), shift in 0usize..5) {
        let k = 5;
        let relabeled: Vec<usize> = pred.iter().map(|&p| (p + shift) % k).collect();
        let a = clustering_accuracy(&pred, &truth).unwrap();
        prop_assert!((a - clustering_accuracy(&relabeled, &truth).unwrap()).abs() < 1e-15);
        prop_assert!((a - brute_force_acc(&pred, &truth)).abs() < 1e-15);
    }

    #[test]
    fn nmi_is_symmetric_and_bounded((a, b) in labels(6, 30)) {
        let x = nmi(&a, &b).unwrap();
        prop_assert!((x - nmi(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&x));
    }
}
