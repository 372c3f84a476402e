use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants map one-to-one onto the failure classes reported by the CLI
/// (validation, numeric failure, structural/property violations).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("inconsistent partition: volumes sum to {sum} (tolerance {tolerance})")]
    InconsistentPartition { sum: f64, tolerance: f64 },

    #[error("numeric failure: {message}")]
    NumericFailure {
        message: String,
        /// Last iterate of the failing solver, when there is one.
        last_iterate: Option<Vec<f64>>,
    },

    #[error("structural violation: {0}")]
    StructuralViolation(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("precondition violated: {message} (measured residual {residual:e})")]
    PreconditionViolation { message: String, residual: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>, last_iterate: Option<Vec<f64>>) -> Self {
        Error::NumericFailure {
            message: msg.into(),
            last_iterate,
        }
    }

    /// True for errors caused by bad inputs rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::Unsupported(_)
                | Error::InconsistentPartition { .. }
                | Error::InvalidMesh(_)
                | Error::PreconditionViolation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
