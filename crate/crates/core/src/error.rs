//! Error type shared by every module.

use thiserror::Error;

/// Library error. Validation problems and numerical failures are kept apart so
/// callers (and the command-line front end) can react differently.
#[derive(Debug, Error)]
pub enum Error {
    /// Inputs violate a documented precondition.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// A numerical procedure failed (non-convergence, divergence, overflow).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Malformed serialized input.
    #[error("parse error: {0}")]
    Parse(String),
    /// Filesystem or stream failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// True for numerical failures, false for validation and I/O errors.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
