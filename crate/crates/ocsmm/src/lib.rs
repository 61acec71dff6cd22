//! One-class support measure machines: group anomaly detection on kernel
//! mean embeddings, with a dual use as a variable-bandwidth kernel density
//! estimator for data with observed measurement uncertainty.
//!
//! Groups of points are embedded as mean elements of an RKHS; a one-class
//! dual problem over the Gram matrix of those embeddings yields weights and
//! an offset; groups score below zero are flagged as anomalous. The same
//! weighted kernel expansion, under the analytic Gaussian kernel, is a
//! (sparse, variable-bandwidth) density estimate.
//!
//! Modules:
//! - [`kernel`]: base/analytic/embedding kernels, Gram assembly, median
//!   heuristic, spherical normalization.
//! - [`solver`]: deterministic SMO for the dual, plus a projected-gradient
//!   reference solver.
//! - [`model`]: fit / decision / scoring / nu-property check / persistence.
//! - [`density`]: KDE, balloon and sample-smoothing estimators, and the
//!   detector-induced density.
//! - [`data`]: dataset model, JSONL and CSV I/O, synthetic generators.
//! - [`eval`]: ROC/AUC/AP, nu sweeps, integrated squared error.
//! - [`rng`]: the fixed sampling conventions behind reproducible datasets.

pub mod data;
pub mod density;
pub mod error;
pub mod eval;
pub mod kernel;
mod linalg;
pub mod model;
pub mod rng;
pub mod solver;

pub use data::{Group, GroupDataset};
pub use error::{Error, Result};
pub use kernel::{BaseKernel, GammaParam, GramMatrix, GroupKernelSpec, Level1, Level2};
pub use model::{FitConfig, FitReport, OcsmmModel, ScoredDataset};
pub use solver::{DualProblem, DualSolution};
