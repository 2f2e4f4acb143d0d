use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),

    #[error("matrix market parse error at line {line}: {reason}")]
    MatrixMarket { line: usize, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("zero or near-zero pivot {value:e} at row {row}")]
    ZeroPivot { row: usize, value: f64 },

    #[error("factorization breakdown: {0}")]
    Breakdown(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("diagnostic data was not retained for this run")]
    DiagnosticsMissing,

    #[error("shifted system is singular for shift {re:e}{im:+e}i: {reason}")]
    SingularShift { re: f64, im: f64, reason: String },

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

    pub(crate) fn dims(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        }
    }
}
