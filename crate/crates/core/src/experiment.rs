//! Sweep harness: factorize a labelled dataset with several methods over a
//! list of second-layer widths and seeds, cluster the learned features and
//! report ACC/NMI as CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aonmf::{aonmf_fit, AonmfConfig};
use crate::clustering::{clustering_accuracy, kmeans, nmi, row_argmax, KMeansConfig};
use crate::data::Dataset;
use crate::deep::{deep_cost, train, DeepConfig, LayerSpec, PenaltyForm};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nmf::{nmf_fit, NmfConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "nmf")]
    Nmf,
    #[serde(rename = "aonmf")]
    Aonmf,
    #[serde(rename = "daonmf")]
    Daonmf,
    /// Deep model, labels taken as the row argmax of `H_L` instead of K-means.
    #[serde(rename = "argmax-daonmf")]
    ArgmaxDaonmf,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Nmf => "nmf",
            Method::Aonmf => "aonmf",
            Method::Daonmf => "daonmf",
            Method::ArgmaxDaonmf => "argmax-daonmf",
        }
    }

    fn is_deep(self) -> bool {
        matches!(self, Method::Daonmf | Method::ArgmaxDaonmf)
    }
}

fn default_image_side() -> usize {
    32
}
fn default_restarts() -> usize {
    10
}
fn default_kmeans_iters() -> usize {
    300
}
fn default_max_iters() -> usize {
    200
}
fn default_tol() -> f64 {
    1e-5
}
fn default_pretrain_iters() -> usize {
    500
}
fn default_pretrain_tol() -> f64 {
    1e-6
}

/// Flat JSON experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset directory (`X.mat` + `labels.txt`, or class folders of PGMs).
    pub dataset: PathBuf,
    #[serde(default = "default_image_side")]
    pub image_side: usize,
    pub methods: Vec<Method>,
    /// First-layer width of the deep model.
    pub k1: usize,
    /// Second-layer widths; also the rank of the single-layer methods.
    pub k2_sweep: Vec<usize>,
    /// `[λ₁, λ₂]`; `λ₂` is also the AONMF penalty.
    pub lambdas: Vec<f64>,
    #[serde(default = "default_restarts")]
    pub kmeans_restarts: usize,
    #[serde(default = "default_kmeans_iters")]
    pub kmeans_max_iters: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Iteration cap of the single-layer solvers and of deep fine-tuning.
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_pretrain_iters")]
    pub pretrain_iters: usize,
    #[serde(default = "default_pretrain_tol")]
    pub pretrain_tol: f64,
    #[serde(default)]
    pub penalty_form: PenaltyForm,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("methods list is empty".into()));
        }
        if self.k2_sweep.is_empty() {
            return Err(Error::Config("k2_sweep is empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds list is empty".into()));
        }
        if self.lambdas.is_empty() || self.lambdas.len() > 2 {
            return Err(Error::Config("lambdas must hold one or two values".into()));
        }
        if self.lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::Config("lambdas must be finite and >= 0".into()));
        }
        Ok(())
    }

    fn lambda1(&self) -> f64 {
        self.lambdas[0]
    }

    fn lambda2(&self) -> f64 {
        *self.lambdas.last().unwrap()
    }
}

/// One data row of the report.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRow {
    pub method: Method,
    pub k2: usize,
    pub seed: u64,
    pub outcome: std::result::Result<RunScores, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunScores {
    pub acc: f64,
    pub nmi: f64,
    pub final_cost: f64,
    pub iters: usize,
}

pub const CSV_HEADER: &str = "method,k2,seed,acc,nmi,final_cost,iters,status";

#[derive(Clone, Copy, PartialEq, Eq)]
enum Family {
    Nmf,
    Aonmf,
    Deep,
}

fn cluster_scores(
    features: &Matrix,
    truth: &[usize],
    k: usize,
    seed: u64,
    cfg: &ExperimentConfig,
    argmax: bool,
) -> Result<(f64, f64)> {
    let pred = if argmax {
        row_argmax(features)
    } else {
        let km = KMeansConfig {
            k,
            seed,
            restarts: cfg.kmeans_restarts,
            max_iters: cfg.kmeans_max_iters,
        };
        kmeans(&features.normalize_columns(), &km)?.labels
    };
    Ok((clustering_accuracy(&pred, truth)?, nmi(&pred, truth)?))
}

fn run_family(
    family: Family,
    methods: &[Method],
    ds: &Dataset,
    truth: &[usize],
    k: usize,
    k2: usize,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Vec<RunRow> {
    let fit = || -> Result<(Matrix, f64, usize)> {
        match family {
            Family::Nmf => {
                let mut c = NmfConfig::new(k2);
                c.max_iters = cfg.max_iters;
                c.tol = cfg.tol;
                c.seed = seed;
                let f = nmf_fit(&ds.x, &c)?;
                Ok((f.h.as_matrix().clone(), f.final_cost(), f.iters_run))
            }
            Family::Aonmf => {
                let mut c = AonmfConfig::new(k2, cfg.lambda2());
                c.max_iters = cfg.max_iters;
                c.tol = cfg.tol;
                c.seed = seed;
                let f = aonmf_fit(&ds.x, &c)?;
                Ok((f.h.as_matrix().clone(), f.final_cost(), f.iters_run))
            }
            Family::Deep => {
                let spec = LayerSpec::new(vec![cfg.k1, k2], vec![cfg.lambda1(), cfg.lambda2()])?;
                let dc = DeepConfig {
                    seed,
                    pretrain_iters: cfg.pretrain_iters,
                    pretrain_tol: cfg.pretrain_tol,
                    max_iters: cfg.max_iters,
                    tol: cfg.tol,
                    penalty_form: cfg.penalty_form,
                    ..DeepConfig::default()
                };
                let model = train(&ds.x, &spec, &dc)?;
                let cost = deep_cost(&ds.x, &model)?;
                Ok((model.h_last().as_matrix().clone(), cost, model.iters_run))
            }
        }
    };
    let fitted = fit();
    methods
        .iter()
        .map(|&method| {
            let outcome = match &fitted {
                Ok((features, cost, iters)) => {
                    cluster_scores(features, truth, k, seed, cfg, method == Method::ArgmaxDaonmf)
                        .map(|(acc, nmi)| RunScores {
                            acc,
                            nmi,
                            final_cost: *cost,
                            iters: *iters,
                        })
                        .map_err(|e| e.to_string())
                }
                Err(e) => Err(e.to_string()),
            };
            RunRow {
                method,
                k2,
                seed,
                outcome,
            }
        })
        .collect()
}

/// Runs every (method, k2, seed) combination on a loaded dataset. Rows come
/// back ordered by method, then k2, then seed, in configuration order.
/// Individual failures become rows with an error status.
pub fn run_sweep(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Vec<RunRow>> {
    cfg.validate()?;
    let truth = ds
        .labels
        .as_ref()
        .ok_or_else(|| Error::data(&cfg.dataset, "dataset has no ground-truth labels"))?;
    let k = ds.n_classes().unwrap_or(1);
    let mut methods = cfg.methods.clone();
    methods.dedup();

    let mut jobs = Vec::new();
    for family in [Family::Nmf, Family::Aonmf, Family::Deep] {
        let members: Vec<Method> = methods
            .iter()
            .copied()
            .filter(|m| match family {
                Family::Nmf => *m == Method::Nmf,
                Family::Aonmf => *m == Method::Aonmf,
                Family::Deep => m.is_deep(),
            })
            .collect();
        if members.is_empty() {
            continue;
        }
        for &k2 in &cfg.k2_sweep {
            for &seed in &cfg.seeds {
                jobs.push((family, members.clone(), k2, seed));
            }
        }
    }
    let mut rows: Vec<RunRow> = jobs
        .par_iter()
        .flat_map_iter(|(family, members, k2, seed)| {
            run_family(*family, members, ds, truth, k, *k2, *seed, cfg)
        })
        .collect();

    let pos = |row: &RunRow| {
        (
            methods.iter().position(|m| *m == row.method).unwrap(),
            cfg.k2_sweep.iter().position(|k| *k == row.k2).unwrap(),
            cfg.seeds.iter().position(|s| *s == row.seed).unwrap(),
        )
    };
    rows.sort_by_key(pos);
    Ok(rows)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Renders rows as CSV followed by one summary row per (method, k2).
///
/// Summary rows put `mean` in the seed column, means in the numeric
/// columns and `summary:acc_sd=..:nmi_sd=..:runs=..` in the status column.
pub fn render_csv(cfg: &ExperimentConfig, rows: &[RunRow]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        match &row.outcome {
            Ok(s) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{:.6},{:.6},{:.6e},{},ok",
                    row.method.name(),
                    row.k2,
                    row.seed,
                    s.acc,
                    s.nmi,
                    s.final_cost,
                    s.iters
                );
            }
            Err(msg) => {
                let clean: String = msg.chars().map(|c| if c == ',' || c == '\n' { ';' } else { c }).collect();
                let _ = writeln!(out, "{},{},{},,,,,error: {clean}", row.method.name(), row.k2, row.seed);
            }
        }
    }
    let mut methods = cfg.methods.clone();
    methods.dedup();
    for method in methods {
        for &k2 in &cfg.k2_sweep {
            let ok: Vec<&RunScores> = rows
                .iter()
                .filter(|r| r.method == method && r.k2 == k2)
                .filter_map(|r| r.outcome.as_ref().ok())
                .collect();
            if ok.is_empty() {
                let _ = writeln!(out, "{},{k2},mean,,,,,summary:runs=0", method.name());
                continue;
            }
            let (acc, acc_sd) = mean_sd(&ok.iter().map(|s| s.acc).collect::<Vec<_>>());
            let (nmi, nmi_sd) = mean_sd(&ok.iter().map(|s| s.nmi).collect::<Vec<_>>());
            let (cost, _) = mean_sd(&ok.iter().map(|s| s.final_cost).collect::<Vec<_>>());
            let (iters, _) = mean_sd(&ok.iter().map(|s| s.iters as f64).collect::<Vec<_>>());
            let _ = writeln!(
                out,
                "{},{k2},mean,{acc:.6},{nmi:.6},{cost:.6e},{iters:.1},summary:acc_sd={acc_sd:.6}:nmi_sd={nmi_sd:.6}:runs={}",
                method.name(),
                ok.len()
            );
        }
    }
    out
}

/// Loads the dataset, runs the sweep and returns the CSV report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    let ds = Dataset::load(&cfg.dataset, cfg.image_side)?;
    let rows = run_sweep(cfg, &ds)?;
    Ok(render_csv(cfg, &rows))
}
