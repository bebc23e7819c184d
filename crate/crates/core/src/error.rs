use thiserror::Error;

use crate::ba::GibbsSolution;

/// Errors produced by the solvers and the probability primitives.
#[derive(Debug, Error)]
pub enum BpriError {
    #[error("input is not a probability vector: {0}")]
    NonSimplexInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("p puts mass {mass} on index {index} where q has none")]
    SupportViolation { index: usize, mass: f64 },

    #[error("marginal has no strictly positive entry")]
    EmptySupport,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("loss matrix contains a non-finite entry at ({row}, {col})")]
    NonFiniteLoss { row: usize, col: usize },

    #[error("Blahut-Arimoto did not converge after {iterations} iterations (residual {residual:e})")]
    MaxIterExceeded {
        iterations: usize,
        residual: f64,
        best: Box<GibbsSolution>,
    },

    #[error("capacity {kappa} nats is outside the attainable range [0, {max}]")]
    CapacityOutOfRange { kappa: f64, max: f64 },

    #[error("matrix is not symmetric positive-definite: {0}")]
    SingularMatrix(String),

    #[error("dimension {0} is too small; need at least 3")]
    DimensionTooSmall(usize),

    #[error("outer soft-Bellman loop did not converge after {iterations} passes (change {change:e})")]
    MaxOuterExceeded {
        iterations: usize,
        change: f64,
        best: Box<crate::dynamic::SoftPlan>,
    },

    #[error("value iteration did not converge after {iterations} iterations (delta {delta:e})")]
    ValueIterationExceeded { iterations: usize, delta: f64 },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl BpriError {
    /// True for errors that mean "the solver ran but did not meet its tolerance".
    pub fn is_non_convergence(&self) -> bool {
        matches!(
            self,
            BpriError::MaxIterExceeded { .. }
                | BpriError::MaxOuterExceeded { .. }
                | BpriError::ValueIterationExceeded { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, BpriError>;
