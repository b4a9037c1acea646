use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not symmetric at ({row}, {col}): {upper} vs {lower}")]
    NotSymmetric {
        row: usize,
        col: usize,
        upper: f64,
        lower: f64,
    },

    #[error("factor entry ({row}, {col}) = {value} is negative or not finite")]
    InvalidFactorEntry { row: usize, col: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("cubic coefficients are invalid: {0}")]
    Cubic(String),

    #[error("block order is not a permutation of 0..{expected}: {reason}")]
    NotAPermutation { expected: usize, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("duplicate data point {index}: self-tuning scale is zero")]
    DuplicatePoint { index: usize },

    #[error("worker {worker} panicked; round {round} aborted")]
    WorkerPanic { worker: usize, round: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
