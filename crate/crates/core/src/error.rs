//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimensions of an operand do not match what the operation requires.
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: String,
        expected: String,
        actual: String,
    },

    /// A NaN or infinite entry was found where only finite values are admitted.
    #[error("non-finite value at {path}")]
    NonFinite { path: String },

    /// An argument violates a documented precondition.
    #[error("invalid argument for {context}: {message}")]
    InvalidArgument { context: String, message: String },

    /// An exhaustive computation would exceed its configured size cap.
    #[error("{what} requires {needed} units but the cap is {cap}; raise the cap or use a sampling strategy")]
    CapExceeded {
        what: String,
        needed: u128,
        cap: u128,
    },

    /// The same-region precondition of local SHAP does not hold.
    #[error("local SHAP precondition violated: {message}; use global mode instead")]
    LocalShapPrecondition { message: String },

    /// Model file could not be parsed as JSON.
    #[error("parse error: {message}")]
    Parse { message: String },

    /// Model file declares an unsupported format version.
    #[error("unsupported format version {found:?}; this tool reads version {supported:?}")]
    Version { found: String, supported: String },

    /// Model file content violates the documented schema.
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// An internal invariant was violated; indicates a bug, not bad input.
    #[error("internal error: {message}")]
    Internal { message: String },
}

impl Error {
    /// Stable machine-readable tag for each variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidArgument { .. } => "invalid_argument",
            Error::CapExceeded { .. } => "cap_exceeded",
            Error::LocalShapPrecondition { .. } => "local_shap_precondition",
            Error::Parse { .. } => "parse_error",
            Error::Version { .. } => "version_error",
            Error::Schema { .. } => "schema_error",
            Error::Io(_) => "io_error",
            Error::Internal { .. } => "internal_error",
        }
    }

    /// True for defects inside this library rather than unusable input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Internal { .. })
    }

    pub(crate) fn shape(context: impl Into<String>, expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: expected.into(),
            actual: actual.into(),
        }
    }

    pub(crate) fn internal(message: impl Into<String>) -> Self {
        Error::Internal {
            message: message.into(),
        }
    }
}
