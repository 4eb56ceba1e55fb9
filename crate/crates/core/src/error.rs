use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the factorization, clustering and data layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dim(String),

    #[error("index {index} out of range for {len} columns")]
    Index { index: usize, len: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate column {column}: squared norm below epsilon")]
    DegenerateColumn { column: usize },

    #[error("invalid data in {path}: {msg}")]
    InvalidData { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn data(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::InvalidData {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// True for errors caused by files or their contents rather than by
    /// parameters. The CLI maps these to exit code 3.
    pub fn is_data_error(&self) -> bool {
        matches!(self, Error::InvalidData { .. } | Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
