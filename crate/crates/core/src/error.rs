use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("shape error: {0}")]
    ShapeError(String),

    #[error("unsupported exponent: {0}")]
    UnsupportedExponent(String),

    /// A zero entry sits where the computation needs a strictly positive one.
    /// Approach the boundary through `analysis::epsilon_limit_study` instead.
    #[error("boundary singularity: {0}")]
    BoundarySingularity(String),

    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
