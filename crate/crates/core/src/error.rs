use thiserror::Error;

/// Errors produced by the frame laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    /// A numeric argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector or matrix shapes do not agree.
    #[error("dimension mismatch: {context}: expected {expected}, got {got}")]
    Dimension {
        context: String,
        expected: usize,
        got: usize,
    },

    /// A square matrix was required.
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    /// A family of vectors is linearly dependent (or empty).
    #[error("rank error: {0}")]
    Rank(String),

    /// A precondition of an operation does not hold.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A structural invariant of a frame or projection failed.
    #[error("invalid {what}: {reason}")]
    Invalid { what: String, reason: String },

    /// The requested configuration is not supported.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl FrameError {
    pub(crate) fn dim(context: impl Into<String>, expected: usize, got: usize) -> Self {
        FrameError::Dimension {
            context: context.into(),
            expected,
            got,
        }
    }

    pub(crate) fn invalid(what: impl Into<String>, reason: impl Into<String>) -> Self {
        FrameError::Invalid {
            what: what.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = FrameError> = std::result::Result<T, E>;
