//! Plain NMF with Lee–Seung multiplicative updates for `½‖X − WHᵀ‖²_F`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{Matrix, NonnegMatrix};

pub const DEFAULT_EPSILON: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct NmfConfig {
    pub rank: usize,
    pub max_iters: usize,
    /// Relative objective change below which iteration stops.
    pub tol: f64,
    pub seed: u64,
    /// Added to every multiplicative denominator.
    pub epsilon: f64,
}

impl NmfConfig {
    pub fn new(rank: usize) -> Self {
        NmfConfig {
            rank,
            max_iters: 500,
            tol: 1e-6,
            seed: 0,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub(crate) fn validate(&self, x: &Matrix) -> Result<()> {
        validate_common(x, self.rank, self.max_iters, self.tol, self.epsilon)
    }
}

pub(crate) fn validate_common(
    x: &Matrix,
    rank: usize,
    max_iters: usize,
    tol: f64,
    epsilon: f64,
) -> Result<()> {
    let limit = x.rows().min(x.cols());
    if rank == 0 || rank > limit {
        return Err(Error::Config(format!(
            "rank {rank} must be in 1..={limit} for a {}x{} matrix",
            x.rows(),
            x.cols()
        )));
    }
    if max_iters == 0 {
        return Err(Error::Config("max_iters must be positive".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::Config(format!("tol must be >= 0, got {tol}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be > 0, got {epsilon}")));
    }
    Ok(())
}

/// Single-layer factor pair `X ≈ W Hᵀ` with its fit history.
#[derive(Clone, Debug)]
pub struct Factorization {
    pub w: NonnegMatrix,
    pub h: NonnegMatrix,
    /// Objective at initialization followed by one value per iteration.
    pub cost_trace: Vec<f64>,
    pub iters_run: usize,
    pub warnings: Vec<String>,
}

impl Factorization {
    pub fn final_cost(&self) -> f64 {
        *self.cost_trace.last().expect("trace holds the initial cost")
    }
}

/// Strictly positive factors with entries uniform on `(epsilon, 1]`.
pub fn init_factors(m: usize, n: usize, r: usize, seed: u64) -> (NonnegMatrix, NonnegMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = positive_uniform(m, r, DEFAULT_EPSILON, &mut rng);
    let h = positive_uniform(n, r, DEFAULT_EPSILON, &mut rng);
    (w, h)
}

pub(crate) fn positive_uniform<R: Rng>(
    rows: usize,
    cols: usize,
    floor: f64,
    rng: &mut R,
) -> NonnegMatrix {
    let m = Matrix::from_fn(rows, cols, |_, _| {
        // random() is in [0, 1), so 1 - u is in (0, 1].
        let u: f64 = rng.random();
        floor + (1.0 - floor) * (1.0 - u)
    });
    NonnegMatrix::from_matrix_unchecked(m)
}

/// `½‖X − WHᵀ‖²_F`.
pub fn nmf_cost(x: &Matrix, w: &Matrix, h: &Matrix) -> Result<f64> {
    Ok(0.5 * x.sub(&w.matmul_t(h)?)?.frobenius_sq())
}

/// Relative change test shared by every solver's stopping rule.
pub(crate) fn converged(prev: f64, cur: f64, tol: f64) -> bool {
    if prev == 0.0 {
        return cur == 0.0;
    }
    ((prev - cur) / prev).abs() < tol
}

/// `target ∘ num / (den + eps)`, in place.
pub(crate) fn multiplicative_step(target: &mut Matrix, num: &Matrix, den: &Matrix, eps: f64) {
    debug_assert_eq!(target.shape(), num.shape());
    debug_assert_eq!(target.shape(), den.shape());
    for i in 0..target.rows() {
        let (nr, dr) = (num.row(i), den.row(i));
        for (j, t) in target.row_mut(i).iter_mut().enumerate() {
            *t *= nr[j] / (dr[j] + eps);
        }
    }
}

pub(crate) fn zero_line_warnings(x: &Matrix) -> Vec<String> {
    let mut warnings = Vec::new();
    let zero_rows = (0..x.rows()).filter(|&i| x.row(i).iter().all(|&v| v == 0.0)).count();
    let mut col_nonzero = vec![false; x.cols()];
    for i in 0..x.rows() {
        for (c, &v) in col_nonzero.iter_mut().zip(x.row(i)) {
            *c |= v != 0.0;
        }
    }
    let zero_cols = col_nonzero.iter().filter(|&&c| !c).count();
    if zero_rows > 0 {
        warnings.push(format!(
            "{zero_rows} all-zero row(s) in X; multiplicative updates stall there"
        ));
    }
    if zero_cols > 0 {
        warnings.push(format!(
            "{zero_cols} all-zero column(s) in X; multiplicative updates stall there"
        ));
    }
    warnings
}

/// One Lee–Seung sweep: W then H.
pub(crate) fn nmf_step(x: &Matrix, w: &mut NonnegMatrix, h: &mut NonnegMatrix, eps: f64) -> Result<()> {
    // W ← W ∘ XH / (W HᵀH)
    let xh = x.matmul(h)?;
    let hth = h.t_matmul(h)?;
    let den = w.matmul(&hth)?;
    multiplicative_step(w.inner_mut(), &xh, &den, eps);

    // H ← H ∘ XᵀW / (H WᵀW)
    let xtw = x.t_matmul(w)?;
    let wtw = w.t_matmul(w)?;
    let den = h.matmul(&wtw)?;
    multiplicative_step(h.inner_mut(), &xtw, &den, eps);
    Ok(())
}

pub fn nmf_fit(x: &NonnegMatrix, cfg: &NmfConfig) -> Result<Factorization> {
    cfg.validate(x)?;
    let (mut w, mut h) = init_factors(x.rows(), x.cols(), cfg.rank, cfg.seed);
    let mut trace = vec![nmf_cost(x, &w, &h)?];
    let mut iters = 0;
    while iters < cfg.max_iters {
        nmf_step(x, &mut w, &mut h, cfg.epsilon)?;
        iters += 1;
        let cost = nmf_cost(x, &w, &h)?;
        let prev = *trace.last().unwrap();
        trace.push(cost);
        if converged(prev, cost, cfg.tol) {
            break;
        }
    }
    Ok(Factorization {
        w,
        h,
        cost_trace: trace,
        iters_run: iters,
        warnings: zero_line_warnings(x),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted(m: usize, n: usize, r: usize, seed: u64) -> NonnegMatrix {
        let (w, h) = init_factors(m, n, r, seed);
        NonnegMatrix::new(w.matmul_t(&h).unwrap()).unwrap()
    }

    fn rel_err(x: &Matrix, f: &Factorization) -> f64 {
        (x.sub(&f.w.matmul_t(&f.h).unwrap()).unwrap().frobenius_sq() / x.frobenius_sq()).sqrt()
    }

    #[test]
    fn init_is_deterministic_and_positive() {
        let (a, b) = init_factors(5, 4, 3, 42);
        let (c, d) = init_factors(5, 4, 3, 42);
        assert_eq!(a, c);
        assert_eq!(b, d);
        for seed in 0..20 {
            let (w, h) = init_factors(6, 7, 2, seed);
            assert!(w.data().iter().chain(h.data()).all(|&v| v > 0.0 && v <= 1.0));
        }
        let (e, _) = init_factors(5, 4, 3, 43);
        assert_ne!(a, e);
    }

    #[test]
    fn recovers_planted_rank_three() {
        let x = planted(8, 10, 3, 5);
        let mut cfg = NmfConfig::new(3);
        cfg.max_iters = 10_000;
        cfg.tol = 0.0;
        cfg.seed = 99;
        let f = nmf_fit(&x, &cfg).unwrap();
        assert_eq!(f.iters_run, 10_000);
        assert!(rel_err(&x, &f) < 1e-3, "rel err {}", rel_err(&x, &f));
    }

    #[test]
    fn recovers_rank_one_outer_product() {
        let u = [0.3, 1.2, 0.7, 2.0, 0.1];
        let v = [1.0, 0.5, 0.25, 3.0];
        let x = NonnegMatrix::new(Matrix::from_fn(5, 4, |i, j| u[i] * v[j])).unwrap();
        let mut cfg = NmfConfig::new(1);
        cfg.max_iters = 500;
        let f = nmf_fit(&x, &cfg).unwrap();
        assert!(rel_err(&x, &f) < 1e-6);
    }

    #[test]
    fn zero_data_reaches_zero_cost() {
        let x = NonnegMatrix::zeros(4, 5);
        let f = nmf_fit(&x, &NmfConfig::new(2)).unwrap();
        assert!(f.final_cost() < 1e-20);
        assert!(!f.warnings.is_empty());
    }

    #[test]
    fn rank_too_large_is_config_error() {
        let x = planted(3, 5, 2, 1);
        assert!(matches!(nmf_fit(&x, &NmfConfig::new(4)), Err(Error::Config(_))));
        assert!(matches!(nmf_fit(&x, &NmfConfig::new(0)), Err(Error::Config(_))));
    }

    #[test]
    fn cost_never_increases() {
        for seed in 0..5 {
            let x = crate::data::uniform_matrix(12, 9, 100 + seed);
            let mut cfg = NmfConfig::new(3);
            cfg.seed = seed;
            let f = nmf_fit(&x, &cfg).unwrap();
            for pair in f.cost_trace.windows(2) {
                assert!(pair[1] <= pair[0] * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn exact_fit_is_a_fixed_point() {
        let (mut w, mut h) = init_factors(6, 5, 2, 8);
        let x = w.matmul_t(&h).unwrap();
        let (w0, h0) = (w.clone(), h.clone());
        nmf_step(&x, &mut w, &mut h, DEFAULT_EPSILON).unwrap();
        for (a, b) in w.data().iter().zip(w0.data()).chain(h.data().iter().zip(h0.data())) {
            assert!((a - b).abs() <= 1e-10 * b);
        }
    }
}
