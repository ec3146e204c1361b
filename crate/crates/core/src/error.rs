//! Error types shared by every module in the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by failure category so callers (notably the CLI) can
/// map them onto exit codes without string matching.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A caller violated a documented precondition (dimension mismatch,
    /// empty input, out-of-range parameter).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numeric quantity left its valid domain (non-finite value,
    /// diverging optimisation).
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    /// A physical or structural invariant failed to hold on produced data.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    /// Training diverged or otherwise failed; carries the epoch index.
    #[error("training failed at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    /// A persisted file could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A persisted file declares an unsupported format version.
    #[error("format version mismatch: found {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidArgument(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        CoreError::NumericDomain(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        CoreError::InvariantViolation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
