use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the audit toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A row of a tabular or binary input could not be parsed.
    #[error("parse error in {source_name} at row {row}: {message}")]
    Parse {
        source_name: String,
        row: usize,
        message: String,
    },

    /// The input parsed but violates a data invariant (duplicate ids, unknown ids, ...).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// A numeric precondition failed, e.g. a zero-norm vector.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller-supplied argument is out of range.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Configuration is missing a required entry or is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("could not decode image {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(source_name: impl Into<String>, row: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            row,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the environment rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
