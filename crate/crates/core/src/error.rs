use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A window, segment or sample is too small for the requested operation.
    #[error("sizing error: {0}")]
    Sizing(String),
    /// An argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inconsistent parameters or mismatched inputs.
    #[error("configuration error: {0}")]
    Config(String),
    /// A statistic is undefined for the given data (e.g. no jumps).
    #[error("undefined statistic: {0}")]
    Undefined(String),
}

impl Error {
    pub(crate) fn sizing(msg: impl Into<String>) -> Self {
        Error::Sizing(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn undefined(msg: impl Into<String>) -> Self {
        Error::Undefined(msg.into())
    }
}
