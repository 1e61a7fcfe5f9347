//! Error type shared across the crate.

use std::path::PathBuf;

/// Crate-wide error type.
///
/// Variants map to the failure classes surfaced by the CLI: invalid input
/// data, capacity limits, file-format problems, model construction problems,
/// and decode configuration problems.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Caller-supplied data is invalid (bad token id, empty corpus, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A sequence does not fit the model's maximum length.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A serialized artifact is malformed or does not match expectations.
    #[error("format error: {0}")]
    Format(String),

    /// A model could not be constructed from the given specification.
    #[error("construction error: {0}")]
    Construction(String),

    /// A decode configuration is inconsistent with the model.
    #[error("config error: {0}")]
    Config(String),

    /// I/O failure, annotated with the path involved.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
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
}

pub type Result<T> = std::result::Result<T, Error>;
