//! Error type shared by the estimation and data-handling modules.

use thiserror::Error;

/// Library-level error. Hot inner loops use assertions instead; anything a
/// caller can plausibly feed in wrong surfaces as one of these variants.
#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched dimensions between two arguments, e.g. dataset columns vs
    /// parameter length.
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A structurally invalid argument (empty mixture, weight not in the
    /// simplex, non-finite entry, bad batch count, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Serialization or file parsing problem.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
