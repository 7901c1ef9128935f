use std::path::PathBuf;

/// Errors raised while generating scenarios, optimizing, or writing artifacts.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch in {context}: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("matrix is singular (log|det| = {log_abs_det})")]
    Singular { log_abs_det: f64 },

    #[error("could not draw a well-conditioned {what} after {attempts} attempts")]
    RetryLimit { what: &'static str, attempts: usize },

    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },

    #[error("optimization hit a singular iterate on every one of {attempts} attempts")]
    OptimizationFailed { attempts: usize },

    #[error("row {row} of {which} has zero norm")]
    ZeroNormRow { which: &'static str, row: usize },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
