//! Deep approximately orthogonal nonnegative matrix factorization.
//!
//! A data matrix `X` (features x samples, nonnegative) is factorized as
//! `X ≈ W₁ H₁ᵀ H₂ᵀ ··· H_Lᵀ` where every factor is nonnegative and each
//! `H_l` is pushed towards orthogonal columns by a penalty on the sum of its
//! off-diagonal Gram entries. The rows of the outermost factor `H_L` serve
//! as cluster-friendly sample features.
//!
//! Building blocks:
//! - [`nmf`]: plain multiplicative-update NMF;
//! - [`aonmf`]: single-layer approximately orthogonal NMF solved by HALS;
//! - [`deep`]: layer-wise pretraining and joint fine-tuning of the deep model;
//! - [`clustering`]: K-means, Hungarian-matched accuracy and NMI;
//! - [`data`]: matrix/label/PGM I/O and a planted-cluster generator;
//! - [`experiment`]: parameter sweeps reported as CSV;
//! - [`cli`]: the `daonmf` command-line front end.

pub mod aonmf;
pub mod cli;
pub mod clustering;
pub mod data;
pub mod deep;
pub mod error;
pub mod experiment;
pub mod matrix;
pub mod nmf;

pub use aonmf::{aonmf_cost, aonmf_fit, ortho_residual, AonmfConfig, AonmfResult};
pub use clustering::{
    clustering_accuracy, kmeans, nmi, ClusterAssignment, EvalReport, KMeansConfig,
};
pub use data::{synth_planted, Dataset};
pub use deep::{deep_cost, train, DeepConfig, DeepModel, LayerSpec, PenaltyForm};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, Method};
pub use matrix::{project_nonneg, Matrix, NonnegMatrix, RealMatrix};
pub use nmf::{nmf_cost, nmf_fit, Factorization, NmfConfig};
