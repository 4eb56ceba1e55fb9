//! Scalar-loop reference evaluations shared by the integration tests. They
//! index matrices element by element and never call the library's matrix
//! products.

#![allow(dead_code)]

use daonmf::{DeepModel, Matrix, NonnegMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform on `[lo, hi)`.
pub fn random(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

pub fn random_nonneg(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> NonnegMatrix {
    NonnegMatrix::new(random(rows, cols, 0.05, 1.0, rng)).unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Largest elementwise relative difference, with `floor` guarding tiny
/// reference entries.
pub fn max_rel_diff(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn product(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols(), b.rows());
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        let mut s = 0.0;
        for k in 0..a.cols() {
            s += a.get(i, k) * b.get(k, j);
        }
        s
    })
}

pub fn transpose(a: &Matrix) -> Matrix {
    Matrix::from_fn(a.cols(), a.rows(), |i, j| a.get(j, i))
}

/// `Σ_r Σ_{j≠r} h_rᵀh_j`.
pub fn offdiag_mass(h: &Matrix) -> f64 {
    let mut s = 0.0;
    for r in 0..h.cols() {
        for j in 0..h.cols() {
            if j != r {
                for i in 0..h.rows() {
                    s += h.get(i, r) * h.get(i, j);
                }
            }
        }
    }
    s
}

pub fn half_residual(x: &Matrix, approx: &Matrix) -> f64 {
    let mut s = 0.0;
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let d = x.get(i, j) - approx.get(i, j);
            s += d * d;
        }
    }
    0.5 * s
}

pub fn aonmf_cost(x: &Matrix, w: &Matrix, h: &Matrix, lambda: f64) -> f64 {
    let mut fit = 0.0;
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let mut v = 0.0;
            for r in 0..w.cols() {
                v += w.get(i, r) * h.get(j, r);
            }
            fit += (x.get(i, j) - v).powi(2);
        }
    }
    0.5 * fit + 0.5 * lambda * offdiag_mass(h)
}

pub fn hals_h_col(x: &Matrix, w: &Matrix, h: &Matrix, r: usize, lambda: f64) -> Vec<f64> {
    let mut d = 0.0;
    for m in 0..w.rows() {
        d += w.get(m, r) * w.get(m, r);
    }
    (0..h.rows())
        .map(|i| {
            let mut xtw = 0.0;
            for m in 0..x.rows() {
                xtw += x.get(m, i) * w.get(m, r);
            }
            let mut hwtw = 0.0;
            let mut others = 0.0;
            for s in 0..h.cols() {
                let mut wsr = 0.0;
                for m in 0..w.rows() {
                    wsr += w.get(m, s) * w.get(m, r);
                }
                hwtw += h.get(i, s) * wsr;
                if s != r {
                    others += h.get(i, s);
                }
            }
            (h.get(i, r) + (xtw - hwtw) / d - lambda * others / d).max(0.0)
        })
        .collect()
}

pub fn hals_w_col(x: &Matrix, w: &Matrix, h: &Matrix, r: usize) -> Vec<f64> {
    let mut d = 0.0;
    for n in 0..h.rows() {
        d += h.get(n, r) * h.get(n, r);
    }
    (0..w.rows())
        .map(|i| {
            let mut xh = 0.0;
            for n in 0..x.cols() {
                xh += x.get(i, n) * h.get(n, r);
            }
            let mut whth = 0.0;
            for s in 0..w.cols() {
                let mut hsr = 0.0;
                for n in 0..h.rows() {
                    hsr += h.get(n, s) * h.get(n, r);
                }
                whth += w.get(i, s) * hsr;
            }
            (w.get(i, r) + (xh - whth) / d).max(0.0)
        })
        .collect()
}

pub fn chain(model: &DeepModel) -> Matrix {
    let mut acc = model.w1.as_matrix().clone();
    for h in &model.hs {
        acc = product(&acc, &transpose(h));
    }
    acc
}

pub fn deep_cost(x: &Matrix, model: &DeepModel) -> f64 {
    let penalty: f64 = model
        .hs
        .iter()
        .zip(model.spec.lambdas())
        .map(|(h, l)| 0.5 * l * offdiag_mass(h))
        .sum();
    half_residual(x, &chain(model)) + penalty
}

/// Random model with `H_l` of shape `d_{l+1} x d_l` and `H_L` of `n x d_L`.
pub fn random_model(
    m: usize,
    n: usize,
    sizes: &[usize],
    lambdas: &[f64],
    rng: &mut ChaCha8Rng,
) -> DeepModel {
    let w1 = random_nonneg(m, sizes[0], rng);
    let hs = sizes
        .iter()
        .enumerate()
        .map(|(i, &d)| random_nonneg(sizes.get(i + 1).copied().unwrap_or(n), d, rng))
        .collect();
    DeepModel::from_factors(w1, hs, lambdas.to_vec()).unwrap()
}

/// Best fraction of matches over every relabeling of `pred`.
pub fn brute_force_acc(pred: &[usize], truth: &[usize]) -> f64 {
    let k = pred.iter().chain(truth).max().map_or(0, |m| m + 1);
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0;
    heap_permutations(&mut perm, k, &mut |p| {
        let hits = pred.iter().zip(truth).filter(|(a, b)| p[**a] == **b).count();
        best = best.max(hits);
    });
    best as f64 / pred.len() as f64
}

fn heap_permutations(v: &mut [usize], k: usize, f: &mut impl FnMut(&[usize])) {
    if k <= 1 {
        f(v);
        return;
    }
    for i in 0..k - 1 {
        heap_permutations(v, k - 1, f);
        if k % 2 == 0 {
            v.swap(i, k - 1);
        } else {
            v.swap(0, k - 1);
        }
    }
    heap_permutations(v, k - 1, f);
}

/// Planted blocks `X = W Hᵀ` with disjoint-support, unit-norm columns of `H`.
pub fn planted_orthogonal(m: usize, k: usize, n_per: usize, rng: &mut ChaCha8Rng) -> (Matrix, Matrix, Matrix) {
    let n = k * n_per;
    let w = random(m, k, 0.1, 1.0, rng);
    let mut h = Matrix::zeros(n, k);
    for j in 0..n {
        h.set(j, j / n_per, rng.random_range(0.5..1.5));
    }
    let h = h.normalize_columns();
    (product(&w, &transpose(&h)), w, h)
}
