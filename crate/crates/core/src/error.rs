//! Crate-wide error type and its mapping to process exit codes.

use thiserror::Error;

use crate::expr::ExprError;
use crate::jets::JetError;
use crate::scalar::DomainError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(ExprError),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(DomainError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("jet error: {0}")]
    Jet(JetError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<ExprError> for Error {
    fn from(e: ExprError) -> Self {
        match e {
            ExprError::Domain(d) => Error::Domain(d),
            other => Error::Parse(other),
        }
    }
}

impl From<DomainError> for Error {
    fn from(e: DomainError) -> Self {
        Error::Domain(e)
    }
}

impl From<JetError> for Error {
    fn from(e: JetError) -> Self {
        match e {
            JetError::Expr(x) => x.into(),
            other => Error::Jet(other),
        }
    }
}

impl Error {
    /// Exit code: 2 for bad input, 3 for failures during computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Validation(_) | Error::Json(_) => 2,
            _ => 3,
        }
    }
}
