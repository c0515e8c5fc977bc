use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = BearError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum BearError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("matrix too large for dense routine: {0}")]
    Size(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("storage error on {path}: {source}")]
    Storage {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl BearError {
    pub(crate) fn storage(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BearError::Storage {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        BearError::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
