use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown element '{0}' (supported: H through Ne, or Z in 1..=10)")]
    UnknownElement(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("scf did not converge: residual {residual:.3e} after {iterations} iterations")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("iterate validation failed: {0}")]
    Validation(String),

    #[error("cache rejected: {0}")]
    Cache(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
