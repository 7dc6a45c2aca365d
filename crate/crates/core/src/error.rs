use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    /// A record or argument violates a documented invariant.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("span [{start}, {end}) out of range for text of length {len}")]
    OffsetOutOfRange { start: usize, end: usize, len: usize },

    /// The statistic is undefined for this input (zero variance, zero
    /// expected disagreement, empty expected cell, ...).
    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("sample too small: need at least {needed}, got {got}")]
    TooSmall { needed: usize, got: usize },

    #[error("empty text")]
    EmptyText,
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    /// True for conditions where the data is well-formed but the requested
    /// statistic cannot be computed.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::Degenerate(_) | Error::TooSmall { .. })
    }
}
