//! Deep approximately orthogonal NMF.
//!
//! The model is the chain `X ≈ W₁ H₁ᵀ H₂ᵀ ··· H_Lᵀ` with
//! `W₁: M x d₁`, `H_l: d_{l+1} x d_l` for `l < L` and `H_L: N x d_L`.
//! Intermediate bases `W_l = W₁ H₁ᵀ ··· H_{l-1}ᵀ` are never stored.
//!
//! Training pretrains the chain top-down with single-layer AONMF
//! (`X ≈ W_L H_Lᵀ`, then `W_L ≈ W_{L-1} H_{L-1}ᵀ`, ...) and then fine-tunes
//! all factors jointly:
//!
//! - `W₁` by the multiplicative rule `W₁ ∘ XΦᵀ / (W₁ΦΦᵀ)`, `Φ = H₁ᵀ···H_Lᵀ`;
//! - `H_l`, `l < L`, by `H_l ∘ ΨXᵀW_l / (ΨΨᵀH_lW_lᵀW_l + λ_l H_l P)` with
//!   `Ψ = H_{l+1}ᵀ···H_Lᵀ` and `P` the penalty pattern ([`PenaltyForm`]);
//! - `H_L` column by column with HALS against `W_L`.
//!
//! Layer numbers in this module's public API are 1-based.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::aonmf::{aonmf_fit, noise_column, reinit_rng, sweep_h, AonmfConfig, SweepReport};
use crate::data::{load_matrix, save_matrix};
use crate::error::{Error, Result};
use crate::matrix::{Matrix, NonnegMatrix};
use crate::nmf::{converged, multiplicative_step, DEFAULT_EPSILON};

/// Which penalty gradient the mid-layer multiplicative rule uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyForm {
    /// `λ H (1 − I)`: exact gradient of the off-diagonal Gram penalty.
    #[default]
    Objective,
    /// `λ H 1`: all-ones pattern including the diagonal, i.e. the gradient
    /// of `(λ/2)(1ᵀHᵀH1 − R)`.
    AllPairs,
}

impl fmt::Display for PenaltyForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PenaltyForm::Objective => "objective",
            PenaltyForm::AllPairs => "all-pairs",
        })
    }
}

impl FromStr for PenaltyForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "objective" => Ok(PenaltyForm::Objective),
            "all-pairs" => Ok(PenaltyForm::AllPairs),
            other => Err(Error::Config(format!(
                "unknown penalty form `{other}` (expected objective|all-pairs)"
            ))),
        }
    }
}

/// Layer widths `d₁..d_L` and per-layer penalty weights `λ₁..λ_L`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    sizes: Vec<usize>,
    lambdas: Vec<f64>,
}

impl LayerSpec {
    /// A single lambda is broadcast to every layer.
    pub fn new(sizes: Vec<usize>, lambdas: Vec<f64>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Config("at least one layer is required".into()));
        }
        if let Some(pos) = sizes.iter().position(|&d| d == 0) {
            return Err(Error::Config(format!("layer {} has zero width", pos + 1)));
        }
        let lambdas = match lambdas.len() {
            1 => vec![lambdas[0]; sizes.len()],
            n if n == sizes.len() => lambdas,
            n => {
                return Err(Error::Config(format!(
                    "{n} lambdas for {} layers",
                    sizes.len()
                )))
            }
        };
        if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {l}")));
        }
        Ok(LayerSpec { sizes, lambdas })
    }

    pub fn depth(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeepConfig {
    pub seed: u64,
    pub epsilon: f64,
    /// Iteration cap and tolerance for each pretraining AONMF solve.
    pub pretrain_iters: usize,
    pub pretrain_tol: f64,
    /// Fine-tuning pass cap and relative-change tolerance.
    pub max_iters: usize,
    pub tol: f64,
    pub penalty_form: PenaltyForm,
    /// Keep the objective after every individual update in
    /// [`DeepModel::passes`]. Costs one objective evaluation per update.
    pub record_steps: bool,
}

impl Default for DeepConfig {
    fn default() -> Self {
        DeepConfig {
            seed: 0,
            epsilon: DEFAULT_EPSILON,
            pretrain_iters: 500,
            pretrain_tol: 1e-6,
            max_iters: 200,
            tol: 1e-5,
            penalty_form: PenaltyForm::Objective,
            record_steps: false,
        }
    }
}

/// Objective values seen during one fine-tuning pass.
#[derive(Clone, Debug, PartialEq)]
pub struct PassRecord {
    /// Objective at the start of the pass (after the previous normalization).
    pub start: f64,
    /// Objective after each update of the pass, in order.
    pub steps: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct DeepModel {
    pub w1: NonnegMatrix,
    /// `[H₁, ..., H_L]`.
    pub hs: Vec<NonnegMatrix>,
    pub spec: LayerSpec,
    /// Objective after pretraining followed by the objective at the end of
    /// every fine-tuning pass, taken before the `H_L` normalization.
    pub cost_trace: Vec<f64>,
    pub iters_run: usize,
    /// Columns reinitialized during fine-tuning.
    pub reinits: usize,
    pub passes: Vec<PassRecord>,
}

impl DeepModel {
    /// Assembles a model from explicit factors after checking the chain.
    pub fn from_factors(w1: NonnegMatrix, hs: Vec<NonnegMatrix>, lambdas: Vec<f64>) -> Result<Self> {
        let sizes = std::iter::once(w1.cols())
            .chain(hs.iter().take(hs.len().saturating_sub(1)).map(|h| h.rows()))
            .collect::<Vec<_>>();
        let spec = LayerSpec::new(sizes, lambdas)?;
        let model = DeepModel {
            w1,
            hs,
            spec,
            cost_trace: Vec::new(),
            iters_run: 0,
            reinits: 0,
            passes: Vec::new(),
        };
        model.check_chain()?;
        Ok(model)
    }

    pub fn depth(&self) -> usize {
        self.hs.len()
    }

    /// Outermost factor `H_L` (`N x d_L`), whose rows are the sample features.
    pub fn h_last(&self) -> &NonnegMatrix {
        self.hs.last().expect("model has at least one layer")
    }

    fn check_chain(&self) -> Result<()> {
        let l = self.hs.len();
        if l == 0 || l != self.spec.depth() {
            return Err(Error::Dim(format!(
                "{l} H factors for {} layers",
                self.spec.depth()
            )));
        }
        let mut width = self.w1.cols();
        for (i, h) in self.hs.iter().enumerate() {
            if h.cols() != width || width != self.spec.sizes[i] {
                return Err(Error::Dim(format!(
                    "H{} is {}x{}, expected {} columns",
                    i + 1,
                    h.rows(),
                    h.cols(),
                    self.spec.sizes[i]
                )));
            }
            width = h.rows();
        }
        Ok(())
    }

    fn check_against(&self, x: &Matrix) -> Result<()> {
        self.check_chain()?;
        if self.w1.rows() != x.rows() || self.h_last().rows() != x.cols() {
            return Err(Error::Dim(format!(
                "model maps {}x{} but X is {}x{}",
                self.w1.rows(),
                self.h_last().rows(),
                x.rows(),
                x.cols()
            )));
        }
        Ok(())
    }

    /// `H_fromᵀ ··· H_Lᵀ` for a 0-based `from` (`d_{from+1} x N`).
    fn chain_from(&self, from: usize) -> Result<Matrix> {
        let l = self.hs.len();
        let mut acc = self.hs[l - 1].transpose();
        for i in (from..l - 1).rev() {
            acc = self.hs[i].t_matmul(&acc)?;
        }
        Ok(acc)
    }

    /// `Φ = H₁ᵀ ··· H_Lᵀ` (`d₁ x N`).
    pub fn phi(&self) -> Result<Matrix> {
        self.chain_from(0)
    }

    /// Basis of a 1-based `layer`: `W_l = W₁ H₁ᵀ ··· H_{l-1}ᵀ` (`M x d_l`).
    pub fn basis(&self, layer: usize) -> Result<Matrix> {
        if layer == 0 || layer > self.hs.len() {
            return Err(Error::Dim(format!(
                "layer {layer} outside 1..={}",
                self.hs.len()
            )));
        }
        let mut w = self.w1.as_matrix().clone();
        for h in &self.hs[..layer - 1] {
            w = w.matmul_t(h)?;
        }
        Ok(w)
    }

    /// `W₁ H₁ᵀ ··· H_Lᵀ`.
    pub fn reconstruct(&self) -> Result<Matrix> {
        self.w1.matmul(&self.phi()?)
    }
}

/// Reconstruction error plus every layer's off-diagonal Gram penalty:
/// `½‖X − W₁H₁ᵀ···H_Lᵀ‖² + Σ_l (λ_l/2) Σ_r Σ_{j≠r} H_l(:,r)ᵀH_l(:,j)`.
pub fn deep_cost(x: &Matrix, model: &DeepModel) -> Result<f64> {
    model.check_against(x)?;
    let fit = 0.5 * x.sub(&model.reconstruct()?)?.frobenius_sq();
    let penalty: f64 = model
        .hs
        .iter()
        .zip(model.spec.lambdas())
        .map(|(h, &lambda)| 0.5 * lambda * h.offdiag_gram_sum())
        .sum();
    Ok(fit + penalty)
}

/// Multiplicative update of `W₁`: `W₁ ∘ XΦᵀ / (W₁ΦΦᵀ + ε)`.
pub fn update_w1(x: &Matrix, model: &DeepModel, eps: f64) -> Result<NonnegMatrix> {
    model.check_against(x)?;
    let phi = model.phi()?;
    let num = x.matmul_t(&phi)?;
    let den = model.w1.matmul(&phi.matmul_t(&phi)?)?;
    let mut w1 = model.w1.clone();
    multiplicative_step(w1.inner_mut(), &num, &den, eps);
    Ok(w1)
}

fn check_mid_layer(model: &DeepModel, layer: usize) -> Result<()> {
    if layer == 0 || layer >= model.depth() {
        return Err(Error::Dim(format!(
            "mid-layer update needs layer in 1..{}, got {layer}",
            model.depth()
        )));
    }
    Ok(())
}

/// Gradient split of the mid-layer objective at `H_l` (1-based `layer`):
/// `(numerator, denominator)` with `∇ = denominator − numerator`.
///
/// numerator `= Ψ Xᵀ W_l`; denominator `= ΨΨᵀ H_l W_lᵀW_l + λ_l H_l P`.
pub fn mid_layer_gradient_parts(
    x: &Matrix,
    model: &DeepModel,
    layer: usize,
    form: PenaltyForm,
) -> Result<(Matrix, Matrix)> {
    model.check_against(x)?;
    check_mid_layer(model, layer)?;
    let idx = layer - 1;
    let h = model.hs[idx].as_matrix();
    let w_l = model.basis(layer)?;
    let psi = model.chain_from(idx + 1)?;
    let num = psi.matmul(&x.t_matmul(&w_l)?)?;
    let mut den = psi
        .matmul_t(&psi)?
        .matmul(h)?
        .matmul(&w_l.t_matmul(&w_l)?)?;
    let lambda = model.spec.lambdas()[idx];
    if lambda != 0.0 {
        for i in 0..h.rows() {
            let row = h.row(i).to_vec();
            let total: f64 = row.iter().sum();
            for (k, d) in den.row_mut(i).iter_mut().enumerate() {
                let pattern = match form {
                    PenaltyForm::Objective => total - row[k],
                    PenaltyForm::AllPairs => total,
                };
                *d += lambda * pattern;
            }
        }
    }
    Ok((num, den))
}

/// Gradient of [`mid_layer_objective`] with respect to `H_l`.
pub fn mid_layer_gradient(
    x: &Matrix,
    model: &DeepModel,
    layer: usize,
    form: PenaltyForm,
) -> Result<Matrix> {
    let (num, den) = mid_layer_gradient_parts(x, model, layer, form)?;
    den.sub(&num)
}

/// Objective seen by the mid-layer rule at 1-based `layer`:
/// `½‖X − W_l H_lᵀ Ψ‖² + penalty(H_l)` where the penalty is
/// `(λ/2) Σ_{r≠j} h_rᵀh_j` for [`PenaltyForm::Objective`] and
/// `(λ/2)(1ᵀH_lᵀH_l1 − R)` for [`PenaltyForm::AllPairs`].
pub fn mid_layer_objective(
    x: &Matrix,
    model: &DeepModel,
    layer: usize,
    form: PenaltyForm,
) -> Result<f64> {
    model.check_against(x)?;
    check_mid_layer(model, layer)?;
    let h = model.hs[layer - 1].as_matrix();
    let lambda = model.spec.lambdas()[layer - 1];
    let fit = 0.5 * x.sub(&model.reconstruct()?)?.frobenius_sq();
    let penalty = match form {
        PenaltyForm::Objective => h.offdiag_gram_sum(),
        PenaltyForm::AllPairs => h.offdiag_gram_sum() + h.frobenius_sq() - h.cols() as f64,
    };
    Ok(fit + 0.5 * lambda * penalty)
}

/// Multiplicative update of a middle factor `H_l` (1-based `layer < L`).
pub fn update_h_mid(
    x: &Matrix,
    model: &DeepModel,
    layer: usize,
    form: PenaltyForm,
    eps: f64,
) -> Result<NonnegMatrix> {
    let (num, den) = mid_layer_gradient_parts(x, model, layer, form)?;
    let mut h = model.hs[layer - 1].clone();
    multiplicative_step(h.inner_mut(), &num, &den, eps);
    Ok(h)
}

fn update_h_last_report(x: &Matrix, model: &DeepModel, eps: f64) -> Result<(NonnegMatrix, SweepReport)> {
    model.check_against(x)?;
    let l = model.depth();
    let w_l = model.basis(l)?;
    let mut h = model.hs[l - 1].clone();
    let report = sweep_h(x, &w_l, &mut h, model.spec.lambdas()[l - 1], eps)?;
    Ok((h, report))
}

/// HALS sweep over the columns of `H_L` against `W_L`, in index order.
///
/// Returns `DegenerateColumn` when a column of `W_L` has (near) zero norm;
/// [`train`] repairs the basis and retries.
pub fn update_h_last(x: &Matrix, model: &DeepModel, eps: f64) -> Result<NonnegMatrix> {
    update_h_last_report(x, model, eps).map(|(h, _)| h)
}

/// Refills the factor that produces column `r` of `W_L` with positive noise:
/// column `r` of `W₁` when `L = 1`, row `r` of `H_{L-1}` otherwise.
fn repair_basis_column<R: Rng>(model: &mut DeepModel, r: usize, scale: f64, rng: &mut R) -> Result<()> {
    let l = model.depth();
    if l == 1 {
        let col = noise_column(model.w1.rows(), scale, rng);
        model.w1.inner_mut().set_column(r, &col)
    } else {
        let h = model.hs[l - 2].inner_mut();
        let row = noise_column(h.cols(), 1.0, rng);
        h.row_mut(r).copy_from_slice(&row);
        Ok(())
    }
}

/// Scales the columns of `H_L` to unit norm and moves each scale into the
/// factor feeding the matching column of `W_L`, so the reconstruction
/// `W₁H₁ᵀ···H_Lᵀ` is unchanged.
fn normalize_last_layer(model: &mut DeepModel) {
    let l = model.depth();
    let norms = model.hs[l - 1].column_norms();
    let inv: Vec<f64> = norms.iter().map(|&n| if n > 0.0 { 1.0 / n } else { 1.0 }).collect();
    let keep: Vec<f64> = norms.iter().map(|&n| if n > 0.0 { n } else { 1.0 }).collect();
    model.hs[l - 1].inner_mut().scale_columns(&inv);
    if l == 1 {
        model.w1.inner_mut().scale_columns(&keep);
    } else {
        model.hs[l - 2].inner_mut().scale_rows(&keep);
    }
}

/// Top-down layer-wise AONMF initialization of the chain.
pub fn pretrain(x: &NonnegMatrix, spec: &LayerSpec, cfg: &DeepConfig) -> Result<DeepModel> {
    let l = spec.depth();
    let mut hs: Vec<Option<NonnegMatrix>> = vec![None; l];
    let mut target = x.clone();
    for idx in (0..l).rev() {
        let mut acfg = AonmfConfig::new(spec.sizes[idx], spec.lambdas[idx]);
        acfg.max_iters = cfg.pretrain_iters;
        acfg.tol = cfg.pretrain_tol;
        acfg.epsilon = cfg.epsilon;
        acfg.seed = cfg.seed.wrapping_add((l - 1 - idx) as u64);
        let res = aonmf_fit(&target, &acfg).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("layer {}: {msg}", idx + 1)),
            other => other,
        })?;
        hs[idx] = Some(res.h);
        target = res.w;
    }
    let hs: Vec<NonnegMatrix> = hs.into_iter().map(|h| h.expect("every layer fitted")).collect();
    let mut model = DeepModel {
        w1: target,
        hs,
        spec: spec.clone(),
        cost_trace: Vec::new(),
        iters_run: 0,
        reinits: 0,
        passes: Vec::new(),
    };
    model.cost_trace.push(deep_cost(x, &model)?);
    Ok(model)
}

/// Runs one fine-tuning pass in place; returns the objective before
/// normalization.
fn fine_tune_pass<R: Rng>(
    x: &NonnegMatrix,
    model: &mut DeepModel,
    cfg: &DeepConfig,
    rng: &mut R,
) -> Result<f64> {
    let l = model.depth();
    let mut record = if cfg.record_steps {
        Some(PassRecord {
            start: deep_cost(x, model)?,
            steps: Vec::with_capacity(2 * l),
        })
    } else {
        None
    };
    for layer in 1..=l {
        model.w1 = update_w1(x, model, cfg.epsilon)?;
        if let Some(rec) = record.as_mut() {
            rec.steps.push(deep_cost(x, model)?);
        }
        if layer < l {
            model.hs[layer - 1] = update_h_mid(x, model, layer, cfg.penalty_form, cfg.epsilon)?;
        } else {
            let mut attempts = 0;
            loop {
                match update_h_last_report(x, model, cfg.epsilon) {
                    Ok((h, report)) => {
                        model.hs[l - 1] = h;
                        model.reinits += report.reinitialized;
                        break;
                    }
                    Err(Error::DegenerateColumn { column }) if attempts <= model.spec.sizes[l - 1] => {
                        repair_basis_column(model, column, x.mean(), rng)?;
                        model.reinits += 1;
                        attempts += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        if let Some(rec) = record.as_mut() {
            rec.steps.push(deep_cost(x, model)?);
        }
    }
    let cost = deep_cost(x, model)?;
    if let Some(rec) = record {
        model.passes.push(rec);
    }
    Ok(cost)
}

/// Continues fine-tuning an existing model for up to `cfg.max_iters` passes.
pub fn fine_tune(x: &NonnegMatrix, model: &mut DeepModel, cfg: &DeepConfig) -> Result<()> {
    model.check_against(x)?;
    if model.cost_trace.is_empty() {
        model.cost_trace.push(deep_cost(x, model)?);
    }
    let mut rng = reinit_rng(cfg.seed.wrapping_add(0x5eed));
    for _ in 0..cfg.max_iters {
        let cost = fine_tune_pass(x, model, cfg, &mut rng)?;
        normalize_last_layer(model);
        model.iters_run += 1;
        let prev = *model.cost_trace.last().unwrap();
        model.cost_trace.push(cost);
        if converged(prev, cost, cfg.tol) {
            break;
        }
    }
    Ok(())
}

/// Pretrains and fine-tunes a deep model. On return every column of `H_L`
/// has unit Euclidean norm.
pub fn train(x: &NonnegMatrix, spec: &LayerSpec, cfg: &DeepConfig) -> Result<DeepModel> {
    let mut model = pretrain(x, spec, cfg)?;
    normalize_last_layer(&mut model);
    model.cost_trace = vec![deep_cost(x, &model)?];
    fine_tune(x, &mut model, cfg)?;
    Ok(model)
}

pub const META_FILE: &str = "meta";

/// Writes `meta` plus `W1.mat`, `H1.mat`, ..., `H{L}.mat` into `dir`.
///
/// `meta` is line-oriented `key value...`: `layers`, `sizes`, `lambdas`,
/// `iterations`, `final_cost`.
pub fn save_model(dir: &Path, model: &DeepModel, final_cost: f64) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let join = |v: Vec<String>| v.join(" ");
    let meta = format!(
        "layers {}\nsizes {}\nlambdas {}\niterations {}\nfinal_cost {:e}\n",
        model.depth(),
        join(model.spec.sizes().iter().map(|d| d.to_string()).collect()),
        join(model.spec.lambdas().iter().map(|l| format!("{l:e}")).collect()),
        model.iters_run,
        final_cost
    );
    fs::write(dir.join(META_FILE), meta).map_err(|e| Error::io(dir.join(META_FILE), e))?;
    save_matrix(&dir.join("W1.mat"), &model.w1)?;
    for (i, h) in model.hs.iter().enumerate() {
        save_matrix(&dir.join(format!("H{}.mat", i + 1)), h)?;
    }
    Ok(())
}

/// Reads a model directory written by [`save_model`].
pub fn load_model(dir: &Path) -> Result<DeepModel> {
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let mut layers = None;
    let mut lambdas = None;
    let mut iterations = 0;
    for line in text.lines() {
        let mut parts = line.split_whitespace();
        let bad = |what: &str| Error::data(&meta_path, format!("bad `{what}` line"));
        match parts.next() {
            Some("layers") => {
                layers = Some(parts.next().and_then(|v| v.parse::<usize>().ok()).ok_or_else(|| bad("layers"))?)
            }
            Some("lambdas") => {
                lambdas = Some(
                    parts
                        .map(|v| v.parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad("lambdas"))?,
                )
            }
            Some("iterations") => {
                iterations = parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("iterations"))?
            }
            _ => {}
        }
    }
    let layers = layers.ok_or_else(|| Error::data(&meta_path, "missing `layers`"))?;
    let lambdas = lambdas.ok_or_else(|| Error::data(&meta_path, "missing `lambdas`"))?;
    let w1 = load_matrix(&dir.join("W1.mat"))?;
    let hs = (1..=layers)
        .map(|i| load_matrix(&dir.join(format!("H{i}.mat"))))
        .collect::<Result<Vec<_>>>()?;
    let mut model =
        DeepModel::from_factors(w1, hs, lambdas).map_err(|e| Error::data(dir, e.to_string()))?;
    model.iters_run = iterations;
    Ok(model)
}
