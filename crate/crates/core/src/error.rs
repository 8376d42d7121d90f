use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A network, demand or training configuration violates an invariant.
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("signal index {index} out of range (network has {len} signals)")]
    Index { index: usize, len: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("length mismatch: {0}")]
    Length(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("malformed record at line {line}: {reason}")]
    Format { line: usize, reason: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("report mismatch: {0}")]
    Mismatch(String),

    #[error("episode already finished; call reset first")]
    EpisodeDone,

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
