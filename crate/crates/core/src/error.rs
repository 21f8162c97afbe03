use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("{path}: row {row}, column '{column}': {message}")]
    Parse {
        path: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: {message}")]
    File { path: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("non-finite loss at epoch {epoch}, step {step}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        detail: String,
    },

    #[error("separation detected: coefficient '{column}' diverged (|{value:.3}| > {limit})")]
    Separation {
        column: String,
        value: f64,
        limit: f64,
    },

    #[error("singular information matrix (column '{column}')")]
    Singular { column: String },

    #[error("no convergence after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("{failed} of {total} replications failed (first: {first})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("model bundle: {0}")]
    Bundle(String),

    #[error("I/O error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Numerical failures (as opposed to configuration or input faults).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::NonFiniteLoss { .. }
                | Error::Separation { .. }
                | Error::Singular { .. }
                | Error::NotConverged { .. }
                | Error::TooManyFailures { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
