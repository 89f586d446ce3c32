use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every layer of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An operation was invoked in a state that forbids it (stepping a
    /// finished episode, a real action while frozen, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A static configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A value broke a documented invariant (out-of-range index, non-finite entry).
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// Training produced a non-finite loss or gradient.
    #[error("training error: {0}")]
    Training(String),

    /// An explicit MDP failed validation.
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    /// A function was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Parse failure in a text format; `key` names the offending key or line.
    #[error("parse error at {key}: {message}")]
    Parse { key: String, message: String },

    /// CSV inputs to aggregation disagree on schema.
    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
