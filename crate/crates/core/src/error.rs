use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input violates a documented precondition; the message names it.
    #[error("{0}")]
    Precondition(String),
    /// A root could not be bracketed or a solve did not converge.
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
