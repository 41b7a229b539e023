use thiserror::Error;

use crate::element::ElementKey;

/// Errors raised by the solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("polynomial degree {0} is outside the supported range 0..=6")]
    UnsupportedDegree(usize),

    #[error("quadrature order {0} is outside the supported range 1..=20")]
    UnsupportedQuadrature(usize),

    #[error("invalid basis index: {0}")]
    InvalidIndex(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The element table violated one of its structural invariants.
    #[error("structural fault at {key:?}: {reason}")]
    Structural { key: ElementKey, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("unknown initial condition `{0}`")]
    UnknownInitialCondition(String),

    #[error("incompatible Poisson source: mean of (rho - 1) is {0:e}")]
    PoissonCompatibility(f64),

    #[error("grid too large for dense evaluation: {0} unknowns")]
    GridTooLarge(usize),

    #[error("non-finite value encountered at t = {0}")]
    NonFinite(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
