use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition (bad shape, unknown id, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// The node graph is not a single rooted tree.
    #[error("structural error: {0}")]
    Structure(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },

    #[error("missing leaf column `{0}` in data file")]
    MissingLeaf(String),

    #[error("calendar error: {0}")]
    Calendar(String),

    #[error("series too short: {0}")]
    TooShort(String),

    /// A scale, variance, or total needed as a divisor is zero.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("rank deficient: {0}")]
    Rank(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("model fitting failed: {0}")]
    Fit(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
