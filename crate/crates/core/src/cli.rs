//! `daonmf` command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 for
//! missing or malformed data.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::aonmf::{aonmf_fit, AonmfConfig};
use crate::clustering::{kmeans, row_argmax, EvalReport, KMeansConfig};
use crate::data::{load_labels, load_real_matrix, save_labels, save_matrix, synth_planted, Dataset, LABELS_FILE};
use crate::deep::{deep_cost, save_model, train, DeepConfig, LayerSpec, PenaltyForm};
use crate::error::{Error, Result};
use crate::experiment::{run_experiment, ExperimentConfig};
use crate::matrix::Matrix;
use crate::nmf::{nmf_fit, NmfConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "daonmf", version, about = "Deep approximately orthogonal NMF")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Single-layer factorization; writes W.mat and H.mat.
    Factorize(FactorizeArgs),
    /// Deep factorization; writes a model directory.
    DeepFactorize(DeepArgs),
    /// K-means (or argmax) on the rows of a feature matrix; writes labels.
    Cluster(ClusterArgs),
    /// Scores predicted labels against ground truth as a CSV line.
    Evaluate(EvaluateArgs),
    /// Generates a planted-cluster dataset.
    Synth(SynthArgs),
    /// Runs a parameter sweep described by a JSON config.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SingleMethod {
    Nmf,
    Aonmf,
}

#[derive(Args, Debug)]
pub struct FactorizeArgs {
    /// Dataset directory or matrix file.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "aonmf")]
    pub method: SingleMethod,
    #[arg(long)]
    pub rank: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub lambda: f64,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (defaults to the input's directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DeepArgs {
    /// Dataset directory or matrix file.
    pub input: PathBuf,
    /// Layer widths `d1,d2,...`, innermost first.
    #[arg(long, value_delimiter = ',', required = true)]
    pub layers: Vec<usize>,
    /// One penalty per layer, or a single value for all layers. Defaults to
    /// 1e-6 on inner layers and 1e-5 on the last.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
    /// Fine-tuning passes.
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub pretrain_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = PenaltyForm::Objective)]
    pub penalty_form: PenaltyForm,
    /// Model directory (defaults to `model` next to the input).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    /// Feature matrix (samples as rows), a factorization directory holding
    /// `H.mat`, or a model directory.
    pub features: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 300)]
    pub max_iters: usize,
    /// Label each sample by its largest feature instead of K-means.
    #[arg(long)]
    pub argmax: bool,
    /// Labels file to write (defaults to `pred.txt` next to the features).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Dataset directory supplying `labels.txt` when `--truth` is absent.
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Predicted labels file.
    #[arg(long, conflicts_with = "features")]
    pub pred: Option<PathBuf>,
    /// Features to cluster with K-means before scoring.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "unknown")]
    pub method: String,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 40)]
    pub n_per: usize,
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    pub config: PathBuf,
    /// Overrides the config's `output` path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Factorize(a) => factorize(a),
        Command::DeepFactorize(a) => deep_factorize(a),
        Command::Cluster(a) => cluster(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Synth(a) => synth(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn dataset_dir(input: &Path) -> PathBuf {
    if input.is_dir() {
        input.to_path_buf()
    } else {
        input.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

fn factorize(a: FactorizeArgs) -> Result<()> {
    let ds = Dataset::load(&a.input, 32)?;
    let out = a.out.unwrap_or_else(|| dataset_dir(&a.input));
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let (w, h, cost, iters) = match a.method {
        SingleMethod::Nmf => {
            let mut cfg = NmfConfig::new(a.rank);
            cfg.max_iters = a.iters;
            cfg.tol = a.tol;
            cfg.seed = a.seed;
            let f = nmf_fit(&ds.x, &cfg)?;
            for w in &f.warnings {
                eprintln!("warning: {w}");
            }
            let cost = f.final_cost();
            (f.w, f.h, cost, f.iters_run)
        }
        SingleMethod::Aonmf => {
            let mut cfg = AonmfConfig::new(a.rank, a.lambda);
            cfg.max_iters = a.iters;
            cfg.tol = a.tol;
            cfg.seed = a.seed;
            let f = aonmf_fit(&ds.x, &cfg)?;
            let cost = f.final_cost();
            (f.w, f.h, cost, f.iters_run)
        }
    };
    save_matrix(&out.join("W.mat"), &w)?;
    save_matrix(&out.join("H.mat"), &h)?;
    println!("final_cost {cost:e}");
    println!("iterations {iters}");
    Ok(())
}

fn deep_factorize(a: DeepArgs) -> Result<()> {
    let ds = Dataset::load(&a.input, 32)?;
    let lambdas = if a.lambda.is_empty() {
        let mut l = vec![1e-6; a.layers.len()];
        if let Some(last) = l.last_mut() {
            *last = 1e-5;
        }
        l
    } else {
        a.lambda
    };
    let spec = LayerSpec::new(a.layers, lambdas)?;
    let cfg = DeepConfig {
        seed: a.seed,
        pretrain_iters: a.pretrain_iters,
        max_iters: a.iters,
        tol: a.tol,
        penalty_form: a.penalty_form,
        ..DeepConfig::default()
    };
    let model = train(&ds.x, &spec, &cfg)?;
    let cost = deep_cost(&ds.x, &model)?;
    let out = a.out.unwrap_or_else(|| dataset_dir(&a.input).join("model"));
    save_model(&out, &model, cost)?;
    println!("final_cost {cost:e}");
    println!("iterations {}", model.iters_run);
    println!("reinits {}", model.reinits);
    Ok(())
}

/// Resolves a features argument to a matrix file.
fn features_file(path: &Path) -> PathBuf {
    if !path.is_dir() {
        return path.to_path_buf();
    }
    let h = path.join("H.mat");
    if h.is_file() {
        return h;
    }
    let mut layers: Vec<(usize, PathBuf)> = std::fs::read_dir(path)
        .into_iter()
        .flatten()
        .flatten()
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            let idx = name.strip_prefix('H')?.strip_suffix(".mat")?.parse().ok()?;
            Some((idx, e.path()))
        })
        .collect();
    layers.sort();
    layers.pop().map(|(_, p)| p).unwrap_or(h)
}

fn cluster_features(features: &Matrix, k: usize, seed: u64, restarts: usize, max_iters: usize) -> Result<Vec<usize>> {
    let cfg = KMeansConfig {
        k,
        seed,
        restarts,
        max_iters,
    };
    Ok(kmeans(&features.normalize_columns(), &cfg)?.labels)
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let file = features_file(&a.features);
    let features = load_real_matrix(&file)?;
    let labels = if a.argmax {
        row_argmax(&features)
    } else {
        let k = a
            .k
            .ok_or_else(|| Error::Config("--k is required unless --argmax is given".into()))?;
        cluster_features(&features, k, a.seed, a.restarts, a.max_iters)?
    };
    let out = a
        .out
        .unwrap_or_else(|| file.with_file_name("pred.txt"));
    save_labels(&out, &labels)?;
    println!("wrote {} labels to {}", labels.len(), out.display());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let truth_path = match (&a.truth, &a.dataset) {
        (Some(t), _) => t.clone(),
        (None, Some(d)) => dataset_dir(d).join(LABELS_FILE),
        (None, None) => return Err(Error::Config("give a dataset or --truth".into())),
    };
    let truth = load_labels(&truth_path)?;
    let mut classes = truth.clone();
    classes.sort_unstable();
    classes.dedup();
    let k = a.k.unwrap_or(classes.len());
    let pred = match (&a.pred, &a.features) {
        (Some(p), _) => load_labels(p)?,
        (None, Some(f)) => {
            let file = features_file(f);
            let features = load_real_matrix(&file)?;
            cluster_features(&features, k, a.seed, 10, 300)?
        }
        (None, None) => return Err(Error::Config("give --pred or --features".into())),
    };
    if pred.len() != truth.len() {
        return Err(Error::data(
            &truth_path,
            format!("{} predictions for {} true labels", pred.len(), truth.len()),
        ));
    }
    let report = EvalReport::evaluate(&pred, &truth, k, &a.method, a.seed)?;
    println!("{}", EvalReport::CSV_HEADER);
    println!("{}", report.csv_row());
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let ds = synth_planted(a.k, a.n_per, a.m, a.noise, a.seed)?;
    ds.save(&a.out)?;
    println!(
        "wrote {}x{} matrix with {} classes to {}",
        ds.x.rows(),
        ds.x.cols(),
        a.k,
        a.out.display()
    );
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if a.out.is_some() {
        cfg.output = a.out;
    }
    let csv = run_experiment(&cfg)?;
    match &cfg.output {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            std::fs::write(path, &csv).map_err(|e| Error::io(path, e))?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}
