//! K-means on factor rows and the external clustering metrics ACC and NMI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
    /// Sum of squared distances from each point to its centroid.
    pub inertia: f64,
    /// Inertia after every Lloyd iteration of the winning restart.
    pub inertia_trace: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            seed,
            restarts: 10,
            max_iters: 300,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: first centroid uniform, then proportional to squared
/// distance from the closest chosen centroid.
fn seed_centroids<R: Rng>(points: &Matrix, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.rows();
    let mut centroids = vec![points.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), &c));
        }
        centroids.push(c);
    }
    centroids
}

fn lloyd<R: Rng>(points: &Matrix, k: usize, max_iters: usize, rng: &mut R) -> ClusterAssignment {
    let (n, dim) = points.shape();
    let mut centroids = seed_centroids(points, k, rng);
    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, label) in labels.iter_mut().enumerate() {
            let (c, d) = nearest(points.row(i), &centroids);
            if *label != c {
                *label = c;
                changed = true;
            }
            inertia += d;
        }
        trace.push(inertia);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        // An empty cluster takes over the point farthest from its centroid.
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .map(|i| (i, sq_dist(points.row(i), &centroids[labels[i]])))
                    .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc })
                    .0;
                counts[labels[far]] -= 1;
                labels[far] = c;
                counts[c] = 1;
                centroids[c] = points.row(far).to_vec();
            }
        }
    }
    let inertia = (0..n)
        .map(|i| sq_dist(points.row(i), &centroids[labels[i]]))
        .sum();
    ClusterAssignment {
        labels,
        k,
        inertia,
        inertia_trace: trace,
    }
}

/// Lloyd's algorithm with k-means++ seeding on the rows of `points`; the
/// restart with the lowest inertia wins. Restart `i` draws from stream `i`
/// of a generator seeded with `cfg.seed`, so the result does not depend on
/// scheduling.
pub fn kmeans(points: &Matrix, cfg: &KMeansConfig) -> Result<ClusterAssignment> {
    let n = points.rows();
    if cfg.k == 0 || cfg.k > n {
        return Err(Error::Config(format!(
            "k = {} must be in 1..={n}",
            cfg.k
        )));
    }
    if !points.is_finite() {
        return Err(Error::InvalidInput("points contain non-finite values".into()));
    }
    let runs: Vec<ClusterAssignment> = (0..cfg.restarts.max(1))
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(restart as u64);
            lloyd(points, cfg.k, cfg.max_iters, &mut rng)
        })
        .collect();
    Ok(runs
        .into_iter()
        .reduce(|best, cur| if cur.inertia < best.inertia { cur } else { best })
        .expect("at least one restart"))
}

/// Index of the largest entry in every row (first index on ties).
pub fn row_argmax(m: &Matrix) -> Vec<usize> {
    (0..m.rows())
        .map(|i| {
            m.row(i)
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc })
                .0
        })
        .collect()
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mapped = labels
        .iter()
        .map(|l| ids.binary_search(l).expect("label present"))
        .collect();
    (mapped, ids.len())
}

/// Counts `table[p][t]` of samples with predicted class `p` and true class
/// `t`, after relabeling both sides to `0..k`.
fn contingency(pred: &[usize], truth: &[usize]) -> (Vec<Vec<usize>>, usize, usize) {
    let (p, kp) = compact(pred);
    let (t, kt) = compact(truth);
    let mut table = vec![vec![0usize; kt]; kp];
    for (&a, &b) in p.iter().zip(&t) {
        table[a][b] += 1;
    }
    (table, kp, kt)
}

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "{} predicted labels vs {} true labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("empty labelings".into()));
    }
    Ok(())
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with potentials, O(n³)). Returns `assignment[row] = column`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; index 0 is the virtual source column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Best fraction of samples labeled correctly over all one-to-one
/// relabelings of `pred`. The contingency table is zero-padded to square
/// when the two labelings use different numbers of classes.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let (table, kp, kt) = contingency(pred, truth);
    let k = kp.max(kt);
    let max_count = pred.len() as f64;
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|p| {
            (0..k)
                .map(|t| {
                    let c = if p < kp && t < kt { table[p][t] } else { 0 };
                    max_count - c as f64
                })
                .collect()
        })
        .collect();
    let matched: usize = hungarian(&cost)
        .iter()
        .enumerate()
        .filter(|&(p, &t)| p < kp && t < kt)
        .map(|(p, &t)| table[p][t])
        .sum();
    Ok(matched as f64 / pred.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NmiNorm {
    /// `I / sqrt(H(pred) H(truth))`.
    #[default]
    Geometric,
    /// `I / ((H(pred) + H(truth)) / 2)`.
    Arithmetic,
}

/// Normalized mutual information with natural-log entropies.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    nmi_with(pred, truth, NmiNorm::Geometric)
}

/// When either labeling has zero entropy the score is 1 if the two
/// partitions are identical and 0 otherwise.
pub fn nmi_with(pred: &[usize], truth: &[usize], norm: NmiNorm) -> Result<f64> {
    check_lengths(pred, truth)?;
    let (table, kp, kt) = contingency(pred, truth);
    let n = pred.len() as f64;
    let row: Vec<f64> = table.iter().map(|r| r.iter().sum::<usize>() as f64).collect();
    let col: Vec<f64> = (0..kt)
        .map(|t| table.iter().map(|r| r[t]).sum::<usize>() as f64)
        .collect();
    let entropy = |counts: &[f64]| -> f64 {
        -counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| (c / n) * (c / n).ln())
            .sum::<f64>()
    };
    let hp = entropy(&row);
    let ht = entropy(&col);
    if kp == 1 || kt == 1 {
        // identical as partitions iff both are a single cluster
        return Ok(if kp == kt { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for p in 0..kp {
        for t in 0..kt {
            let c = table[p][t] as f64;
            if c > 0.0 {
                mi += (c / n) * ((c * n) / (row[p] * col[t])).ln();
            }
        }
    }
    let denom = match norm {
        NmiNorm::Geometric => (hp * ht).sqrt(),
        NmiNorm::Arithmetic => 0.5 * (hp + ht),
    };
    Ok((mi / denom).clamp(0.0, 1.0))
}

/// Outcome of evaluating one clustering against the truth.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub acc: f64,
    pub nmi: f64,
    pub k: usize,
    pub method: String,
    pub run_seed: u64,
}

impl EvalReport {
    pub fn evaluate(pred: &[usize], truth: &[usize], k: usize, method: &str, run_seed: u64) -> Result<Self> {
        Ok(EvalReport {
            acc: clustering_accuracy(pred, truth)?,
            nmi: nmi(pred, truth)?,
            k,
            method: method.to_string(),
            run_seed,
        })
    }

    pub const CSV_HEADER: &'static str = "method,k,seed,acc,nmi";

    /// `method,k,seed,acc,nmi`.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6}",
            self.method, self.k, self.run_seed, self.acc, self.nmi
        )
    }
}
