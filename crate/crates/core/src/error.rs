//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A request exceeded a configured size cap.
    #[error("{what} of {requested} exceeds the configured cap of {cap}")]
    Capacity {
        what: String,
        requested: usize,
        cap: usize,
    },

    /// Factorization hit a non-positive pivot even after the jitter schedule.
    #[error("matrix is not positive semidefinite: pivot {pivot} = {value:e} after jitter {jitter:e}")]
    NotPsd { pivot: usize, value: f64, jitter: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("degenerate point at index {index}: zero variance")]
    DegeneratePoint { index: usize },

    #[error("level set is empty")]
    EmptyLevelSet,

    #[error("independence violation: {0}")]
    IndependenceViolation(String),

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code for the CLI: 2 config, 3 model/factorization, 4 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Io(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
