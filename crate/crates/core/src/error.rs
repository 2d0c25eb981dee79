use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("ingestion failed for {path}: {message}")]
    Ingestion { path: PathBuf, message: String },

    #[error("degenerate target: {0}")]
    DegenerateTarget(String),

    #[error("embedding rank too low: requested {requested} dimensions, only {usable} usable")]
    EmbeddingRank { requested: usize, usable: usize },

    #[error("training diverged: {0}")]
    Training(String),

    #[error("lookup failed: {0}")]
    Lookup(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
