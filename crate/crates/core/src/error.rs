use thiserror::Error;

use crate::space::SpaceKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Inputs that do not belong together, e.g. points from two different spaces.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{operation} is not available on {kind:?}")]
    Unsupported {
        operation: &'static str,
        kind: SpaceKind,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
