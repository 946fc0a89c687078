//! Bayesian errors-in-variables regression.
//!
//! The regression function gets a random-Fourier-feature Gaussian-process
//! prior, the latent covariates a truncated Dirichlet-process Gaussian mixture,
//! and the posterior is explored by a Metropolis-within-Gibbs sampler. Exact-GP
//! and deconvoluting-kernel estimators are included as baselines, together
//! with a simulation harness and posterior summaries.

pub mod checks;
pub mod cli;
pub mod config;
pub mod decon;
pub mod diagnostics;
pub mod dpmm;
pub mod error;
pub mod gp_exact;
pub mod harness;
pub mod math;
pub mod output;
pub mod rff;
pub mod sampler;
pub mod summaries;
pub mod types;

pub use config::{validate_config, Method, RawConfig, RunConfig};
pub use error::{Error, Result};
pub use types::{load_dataset, ColumnMap, Dataset, NoiseParam, RngSeed};
