use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("exponent value {value} at sample {index} is not > 1")]
    ExponentDomain { index: usize, value: f64 },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("exponent assumptions violated: {0}")]
    Validation(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
