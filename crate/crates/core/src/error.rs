use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("prox family {0} is not separable; use the vector prox")]
    NotSeparable(&'static str),

    #[error("prox family {0} is not supported in variational mode")]
    UnsupportedInVariationalMode(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mesh needs at least 2 cells per side, got {0}")]
    MeshTooCoarse(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("operator is not positive definite: <Ap, p> = {curvature:e} at CG iteration {iteration}")]
    OperatorNotPositiveDefinite { iteration: usize, curvature: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
