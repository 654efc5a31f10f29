use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid process specification: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("lag {lag} exceeds the available past ({available} innovations before the evaluation index)")]
    LagExceedsPast { lag: usize, available: usize },

    #[error("innovation moment of order {order} is infinite ({detail})")]
    MomentViolation { order: f64, detail: String },

    #[error("decay fit is ill-conditioned: {reason} (max log-residual {residual:.3e})")]
    IllConditionedFit { reason: String, residual: f64 },

    #[error("the kernel window around v = {v} with bandwidth {h} {reason}")]
    KernelWindow { v: f64, h: f64, reason: String },

    #[error("matrix is not positive semidefinite after jitter {jitter:.3e} (pivot {pivot:.3e} at row {row})")]
    NotPsd { jitter: f64, pivot: f64, row: usize },

    #[error("entropy function is not nonincreasing: H({lo:.3e}) = {h_lo} < H({hi:.3e}) = {h_hi}")]
    NonMonotoneEntropy { lo: f64, hi: f64, h_lo: f64, h_hi: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error("malformed input {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
