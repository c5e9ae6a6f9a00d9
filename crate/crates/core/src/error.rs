use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("operation requires a {expected}D lattice, got {actual}D")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("region is empty")]
    EmptyRegion,
    #[error("configurations were built from different parameters")]
    ParamsMismatch,
    #[error("root is not bracketed on [{lo}, {hi}]")]
    NotBracketed { lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
