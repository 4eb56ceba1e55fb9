//! Approximately orthogonal NMF solved column-by-column with HALS.
//!
//! Minimizes `½‖X − WHᵀ‖²_F + (λ/2) Σ_r Σ_{j≠r} h_rᵀ h_j` over nonnegative
//! `W` (M×R) and `H` (N×R). Each column update is the exact minimizer of its
//! subproblem. A column that would vanish is replaced by a nonzero column
//! whose subproblem value is no worse than before, so sweeps of `H` never
//! increase the objective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix, NonnegMatrix};
use crate::nmf::{converged, init_factors, validate_common, DEFAULT_EPSILON};

#[derive(Clone, Debug, PartialEq)]
pub struct AonmfConfig {
    pub rank: usize,
    /// Weight of the off-diagonal `HᵀH` penalty. Zero gives plain NMF.
    pub lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub epsilon: f64,
}

impl AonmfConfig {
    pub fn new(rank: usize, lambda: f64) -> Self {
        AonmfConfig {
            rank,
            lambda,
            max_iters: 500,
            tol: 1e-6,
            seed: 0,
            epsilon: DEFAULT_EPSILON,
        }
    }

    fn validate(&self, x: &Matrix) -> Result<()> {
        validate_common(x, self.rank, self.max_iters, self.tol, self.epsilon)?;
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AonmfResult {
    pub w: NonnegMatrix,
    pub h: NonnegMatrix,
    /// Objective at initialization followed by one value per outer iteration.
    pub cost_trace: Vec<f64>,
    /// Off-diagonal mass of `ĤᵀĤ` where `Ĥ` is `H` with unit-norm columns.
    pub ortho_residual: f64,
    pub iters_run: usize,
    /// Number of columns that had to be reinitialized during the solve.
    pub reinits: usize,
}

impl AonmfResult {
    pub fn final_cost(&self) -> f64 {
        *self.cost_trace.last().expect("trace holds the initial cost")
    }
}

/// `½‖X − WHᵀ‖²_F + (λ/2) Σ_r Σ_{j≠r} h_rᵀ h_j`.
pub fn aonmf_cost(x: &Matrix, w: &Matrix, h: &Matrix, lambda: f64) -> Result<f64> {
    if w.cols() != h.cols() || w.rows() != x.rows() || h.rows() != x.cols() {
        return Err(Error::Dim(format!(
            "X {}x{}, W {}x{}, H {}x{}",
            x.rows(),
            x.cols(),
            w.rows(),
            w.cols(),
            h.rows(),
            h.cols()
        )));
    }
    let fit = 0.5 * x.sub(&w.matmul_t(h)?)?.frobenius_sq();
    Ok(fit + 0.5 * lambda * h.offdiag_gram_sum())
}

/// Scale-free orthogonality measure: off-diagonal Gram mass of `H` after
/// scaling each column to unit norm. Zero iff the columns have disjoint
/// supports.
pub fn ortho_residual(h: &Matrix) -> f64 {
    h.normalize_columns().offdiag_gram_sum()
}

/// Core of the H-column rule given `XᵀW` column `xtw_r`, `WᵀW` column `wtw_r`
/// and the current `H`.
fn h_col_kernel(xtw_r: &[f64], wtw_r: &[f64], h: &Matrix, r: usize, lambda: f64) -> Vec<f64> {
    h_col_unprojected(xtw_r, wtw_r, h, r, lambda).into_iter().map(|v| v.max(0.0)).collect()
}

/// The H-column rule before projection. The column subproblem equals
/// `w_rᵀw_r (½‖h‖² − uᵀh)` up to a constant, where `u` is this vector.
fn h_col_unprojected(xtw_r: &[f64], wtw_r: &[f64], h: &Matrix, r: usize, lambda: f64) -> Vec<f64> {
    let denom = wtw_r[r];
    (0..h.rows())
        .map(|i| {
            let row = h.row(i);
            let hw = dot(row, wtw_r);
            let others: f64 = row.iter().sum::<f64>() - row[r];
            row[r] + (xtw_r[i] - hw) / denom - lambda * others / denom
        })
        .collect()
}

/// Replacement for a column of `H` whose update projects to zero: the
/// candidate `v` rescaled to the norm of `old` when that does no worse on the
/// subproblem with unprojected rule `u`, and `old` itself otherwise.
fn replacement_column(u: &[f64], old: Vec<f64>, mut v: Vec<f64>) -> Vec<f64> {
    let (old_norm, v_norm) = (dot(&old, &old).sqrt(), dot(&v, &v).sqrt());
    if old_norm == 0.0 {
        return v;
    }
    let s = old_norm / v_norm;
    v.iter_mut().for_each(|e| *e *= s);
    let value = |h: &[f64]| 0.5 * dot(h, h) - dot(u, h);
    if value(&v) <= value(&old) {
        v
    } else {
        old
    }
}

/// Core of the W-column rule given `XH` column `xh_r`, `HᵀH` column `hth_r`
/// and the current `W`.
fn w_col_kernel(xh_r: &[f64], hth_r: &[f64], w: &Matrix, r: usize) -> Vec<f64> {
    let denom = hth_r[r];
    (0..w.rows())
        .map(|i| {
            let row = w.row(i);
            (row[r] + (xh_r[i] - dot(row, hth_r)) / denom).max(0.0)
        })
        .collect()
}

fn check_factor_shapes(x: &Matrix, w: &Matrix, h: &Matrix, r: usize) -> Result<()> {
    if w.rows() != x.rows() || h.rows() != x.cols() || w.cols() != h.cols() {
        return Err(Error::Dim(format!(
            "X {}x{}, W {}x{}, H {}x{}",
            x.rows(),
            x.cols(),
            w.rows(),
            w.cols(),
            h.rows(),
            h.cols()
        )));
    }
    if r >= h.cols() {
        return Err(Error::Index {
            index: r,
            len: h.cols(),
        });
    }
    Ok(())
}

/// HALS update of column `r` of `H`:
/// `P₊(h_r + (Xᵀw_r − H Wᵀw_r)/(w_rᵀw_r) − λ H̆_r 1/(w_rᵀw_r))`,
/// where `H̆_r 1` is the sum of the other columns of `H`.
pub fn hals_update_h_col(
    x: &Matrix,
    w: &Matrix,
    h: &Matrix,
    r: usize,
    lambda: f64,
) -> Result<Vec<f64>> {
    check_factor_shapes(x, w, h, r)?;
    let w_r = w.column(r)?;
    if dot(&w_r, &w_r) < DEFAULT_EPSILON {
        return Err(Error::DegenerateColumn { column: r });
    }
    let w_r_mat = Matrix::column_vector(&w_r);
    let xtw_r = x.t_matmul(&w_r_mat)?.into_data();
    let wtw_r = w.t_matmul(&w_r_mat)?.into_data();
    Ok(h_col_kernel(&xtw_r, &wtw_r, h, r, lambda))
}

/// HALS update of column `r` of `W`:
/// `P₊(w_r + (X h_r − W Hᵀh_r)/(h_rᵀh_r))`.
pub fn hals_update_w_col(x: &Matrix, w: &Matrix, h: &Matrix, r: usize) -> Result<Vec<f64>> {
    check_factor_shapes(x, w, h, r)?;
    let h_r = h.column(r)?;
    if dot(&h_r, &h_r) < DEFAULT_EPSILON {
        return Err(Error::DegenerateColumn { column: r });
    }
    let h_r_mat = Matrix::column_vector(&h_r);
    let xh_r = x.matmul(&h_r_mat)?.into_data();
    let hth_r = h.t_matmul(&h_r_mat)?.into_data();
    Ok(w_col_kernel(&xh_r, &hth_r, w, r))
}

/// What happened during one sweep over the columns of a factor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SweepReport {
    pub reinitialized: usize,
    pub skipped: usize,
}

/// Updates every column of `H` in index order against a fixed `W`.
///
/// Fails with `DegenerateColumn` before touching `H` if some column of `W`
/// has squared norm below `eps`. A column that projects to all zeros is
/// rebuilt from the rows whose best-matching basis column is `r`, which
/// keeps it nonzero and disjoint from columns rebuilt in the same sweep. The
/// rebuilt column takes the old column's norm and is used only when it does
/// no worse than the old column, which is kept otherwise.
pub(crate) fn sweep_h(
    x: &Matrix,
    w: &Matrix,
    h: &mut NonnegMatrix,
    lambda: f64,
    eps: f64,
) -> Result<SweepReport> {
    let wtw = w.t_matmul(w)?;
    if let Some(r) = (0..w.cols()).find(|&r| wtw.get(r, r) < eps) {
        return Err(Error::DegenerateColumn { column: r });
    }
    let xtw = x.t_matmul(w)?;
    let mut report = SweepReport::default();
    for r in 0..h.cols() {
        let xtw_r = xtw.column(r)?;
        let wtw_r = wtw.column(r)?;
        let u = h_col_unprojected(&xtw_r, &wtw_r, h, r, lambda);
        let mut col: Vec<f64> = u.iter().map(|v| v.max(0.0)).collect();
        if col.iter().all(|&v| v == 0.0) {
            let v = assignment_column(&xtw, &wtw, r, x.mean());
            col = replacement_column(&u, h.column(r)?, v);
            report.reinitialized += 1;
        }
        h.inner_mut().set_column(r, &col)?;
    }
    Ok(report)
}

/// Nonzero replacement for column `r` of `H`: the unpenalized least-squares
/// coefficient on every row whose projection onto `w_r` is the largest among
/// all basis columns, zero elsewhere.
fn assignment_column(xtw: &Matrix, wtw: &Matrix, r: usize, x_mean: f64) -> Vec<f64> {
    let norms: Vec<f64> = (0..wtw.cols()).map(|j| wtw.get(j, j).sqrt()).collect();
    let denom = wtw.get(r, r);
    let mut col: Vec<f64> = (0..xtw.rows())
        .map(|i| {
            let row = xtw.row(i);
            let best = (0..row.len())
                .max_by(|&a, &b| {
                    (row[a] / norms[a])
                        .partial_cmp(&(row[b] / norms[b]))
                        .unwrap()
                        .then(b.cmp(&a))
                })
                .unwrap();
            if best == r {
                row[r] / denom
            } else {
                0.0
            }
        })
        .collect();
    if col.iter().all(|&v| v == 0.0) {
        let (i_best, v_best) = (0..xtw.rows())
            .map(|i| (i, xtw.get(i, r)))
            .fold((0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
        let v = v_best / denom;
        col[i_best] = if v > 0.0 {
            v
        } else if x_mean > 0.0 {
            x_mean
        } else {
            1.0
        };
    }
    col
}

/// Updates every column of `W` in index order against a fixed `H`.
/// Columns whose `h_r` is degenerate are left as they are; columns that
/// project to zero are refilled with positive noise at the scale of `X`.
pub(crate) fn sweep_w<R: Rng>(
    x: &Matrix,
    w: &mut NonnegMatrix,
    h: &Matrix,
    eps: f64,
    rng: &mut R,
) -> Result<SweepReport> {
    let hth = h.t_matmul(h)?;
    let xh = x.matmul(h)?;
    let mut report = SweepReport::default();
    for r in 0..w.cols() {
        if hth.get(r, r) < eps {
            report.skipped += 1;
            continue;
        }
        let xh_r = xh.column(r)?;
        let hth_r = hth.column(r)?;
        let mut col = w_col_kernel(&xh_r, &hth_r, w, r);
        if col.iter().all(|&v| v == 0.0) {
            col = noise_column(w.rows(), x.mean(), rng);
            report.reinitialized += 1;
        }
        w.inner_mut().set_column(r, &col)?;
    }
    Ok(report)
}

/// Strictly positive uniform column with mean about `scale / 2`.
pub(crate) fn noise_column<R: Rng>(len: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    let scale = if scale > 0.0 { scale } else { 1.0 };
    (0..len)
        .map(|_| {
            let u: f64 = rng.random();
            scale * (1.0 - u)
        })
        .collect()
}

/// Solver RNG for column reinitialization; independent of the init stream.
pub(crate) fn reinit_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// One outer HALS iteration: all columns of `H`, then all columns of `W`.
/// Degenerate `W` columns are refilled with noise before the `H` sweep.
pub(crate) fn hals_iteration<R: Rng>(
    x: &Matrix,
    w: &mut NonnegMatrix,
    h: &mut NonnegMatrix,
    lambda: f64,
    eps: f64,
    rng: &mut R,
) -> Result<usize> {
    let mut reinits = 0;
    loop {
        match sweep_h(x, w, h, lambda, eps) {
            Ok(rep) => {
                reinits += rep.reinitialized;
                break;
            }
            Err(Error::DegenerateColumn { column }) => {
                let col = noise_column(w.rows(), x.mean(), rng);
                w.inner_mut().set_column(column, &col)?;
                reinits += 1;
            }
            Err(e) => return Err(e),
        }
    }
    reinits += sweep_w(x, w, h, eps, rng)?.reinitialized;
    Ok(reinits)
}

pub fn aonmf_fit(x: &NonnegMatrix, cfg: &AonmfConfig) -> Result<AonmfResult> {
    cfg.validate(x)?;
    let (mut w, mut h) = init_factors(x.rows(), x.cols(), cfg.rank, cfg.seed);
    let mut rng = reinit_rng(cfg.seed);
    let mut trace = vec![aonmf_cost(x, &w, &h, cfg.lambda)?];
    let mut reinits = 0;
    let mut iters = 0;
    while iters < cfg.max_iters {
        reinits += hals_iteration(x, &mut w, &mut h, cfg.lambda, cfg.epsilon, &mut rng)?;
        iters += 1;
        let cost = aonmf_cost(x, &w, &h, cfg.lambda)?;
        let prev = *trace.last().unwrap();
        trace.push(cost);
        if converged(prev, cost, cfg.tol) {
            break;
        }
    }
    Ok(AonmfResult {
        ortho_residual: ortho_residual(&h),
        w,
        h,
        cost_trace: trace,
        iters_run: iters,
        reinits,
    })
}
