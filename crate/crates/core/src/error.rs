use thiserror::Error;

/// Errors raised by the geometric quantum mechanics routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero vector has no ray")]
    ZeroVector,

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("coincident rays do not span a line")]
    DegenerateLine,

    #[error("chart with pivot {pivot} does not contain this point (|pivot component| = {magnitude:.3e})")]
    InvalidChart { pivot: usize, magnitude: f64 },

    #[error("quadric is degenerate")]
    DegenerateQuadric,

    #[error("state is maximally entangled (|q| = {q_abs:.12}); use the maximal family instead")]
    MaximallyEntangled { q_abs: f64 },

    #[error("state is not on the quadric (|Q(X,X)| = {residual:.3e})")]
    NotOnQuadric { residual: f64 },

    #[error("integration step {step} rejected: energy drift {drift:.3e} exceeds guard")]
    StepRejected { step: usize, drift: f64 },

    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),

    #[error("loop points {index} and {next} are orthogonal (overlap {overlap:.3e})")]
    OrthogonalLoopPoints { index: usize, next: usize, overlap: f64 },

    #[error("invalid loop: {0}")]
    InvalidLoop(String),

    #[error("base point is orthogonal to loop point {index}")]
    OrthogonalBase { index: usize },

    #[error("eigenstate family is not orthonormal and complete (deviation {deviation:.3e})")]
    NotOrthonormalFamily { deviation: f64 },

    #[error("invalid moment set: Hankel determinant {value:.3e} is negative")]
    InvalidMoments { value: f64 },

    #[error("unsupported rank {0}; symmetric spinors of rank 1..=4 are supported")]
    UnsupportedRank(usize),

    #[error("problem too large for brute force: {0}")]
    CostGuard(String),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{field}: {message}")]
    Validation { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), message: message.into() }
    }
}
