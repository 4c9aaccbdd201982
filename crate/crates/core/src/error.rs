use thiserror::Error;

/// Errors returned by filter construction, perturbation and the experiment harnesses.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("element {element} is outside the universe [0, {universe})")]
    OutsideUniverse { element: u64, universe: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("universe of size {universe} exceeds the enumeration cap of {cap}")]
    UniverseTooLarge { universe: u64, cap: u64 },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
