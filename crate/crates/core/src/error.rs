use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the selection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("non-finite value at row {row}, column {column}")]
    NonFiniteValue { row: usize, column: usize },

    #[error("class `{0}` has no samples")]
    EmptyClass(String),

    #[error("invalid fold count {k} for {n} samples (need 2 <= k <= n)")]
    InvalidFoldCount { k: usize, n: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite state during propagation at round {round}; lower the spectral target")]
    NonFinite { round: usize },

    #[error("target is constant; relevance and NMSE are undefined")]
    ConstantTarget,

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
