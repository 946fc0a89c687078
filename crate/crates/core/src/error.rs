use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column `{0}` in dataset header")]
    MissingColumn(String),

    #[error("non-numeric value `{value}` in column `{column}` at data row {row}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("non-finite value in column `{column}` at data row {row}")]
    NonFinite { row: usize, column: String },

    #[error("dataset needs at least 2 observations, found {0}")]
    TooFewObservations(usize),

    #[error("dataset columns differ in length: y has {y}, w has {w}")]
    LengthMismatch { y: usize, w: usize },

    #[error("invalid config `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unknown estimator `{0}` (expected gpev_a, gpev_n, gpev_f, gp or decon)")]
    UnknownEstimator(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "deconvoluting kernel overflow: delta^2/(2h^2) = {exponent:.1} exceeds 400; use a larger bandwidth than {bandwidth}"
    )]
    KernelOverflow { exponent: f64, bandwidth: f64 },

    #[error("every candidate bandwidth triggered the kernel overflow guard")]
    NoUsableBandwidth,

    #[error("matrix factorization failed: {0}")]
    Factorization(String),

    #[error("non-finite log-likelihood at sweep {sweep}")]
    NonFiniteLogLikelihood { sweep: usize },

    #[error("posterior summaries need at least {needed} draws, found {found}")]
    TooFewDraws { needed: usize, found: usize },

    #[error("requested grid differs from the grid the draws were tabulated on")]
    GridMismatch,

    #[error("draws carry no covariate mixture summaries")]
    NoDensity,

    #[error("group `{group}` has {n} observations; at least 10 are needed")]
    GroupTooSmall { group: String, n: usize },

    #[error("dataset has no group labels")]
    NoGroups,

    #[error("replicate {replicate}, method {method}: {source}")]
    Replicate {
        replicate: usize,
        method: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the user's configuration or input files
    /// rather than by a failure during a run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::Json(_)
                | Error::UnknownEstimator(_)
                | Error::MissingColumn(_)
                | Error::NonNumeric { .. }
                | Error::NonFinite { .. }
                | Error::TooFewObservations(_)
                | Error::LengthMismatch { .. }
                | Error::GroupTooSmall { .. }
                | Error::NoGroups
        )
    }

    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }
}
