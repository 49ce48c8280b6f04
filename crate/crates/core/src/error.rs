//! Error type shared by all pipeline stages.

use thiserror::Error;

/// Errors produced while validating inputs or running simulations.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its documented domain.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An input file could not be read or written.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A data file is present but malformed. `line` is 1-based and includes
    /// the header line so it matches what editors display.
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: u64,
        message: String,
    },

    /// Input data violates a documented precondition (gaps, negative prices,
    /// horizons not covered by a series, ...).
    #[error("invalid data: {0}")]
    Data(String),

    /// An internal invariant was violated; always a bug, never user error.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn malformed(path: &std::path::Path, line: u64, msg: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.display().to_string(),
            line,
            message: msg.into(),
        }
    }
}
