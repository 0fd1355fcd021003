use thiserror::Error;

/// Errors shared by the whole pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invariant violation in trajectory '{id}': {msg}")]
    Invariant { id: String, msg: String },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("environment error: {0}")]
    Env(String),

    #[error("generator error: {0}")]
    Generator(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
