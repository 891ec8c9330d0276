//! Error type shared across the library.

use thiserror::Error;

/// Errors produced by model construction, fitting, and tuning.
#[derive(Debug, Error)]
pub enum ArskError {
    /// A parameter or input violated a precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Inputs that must agree in shape did not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Every variable weight was thresholded to zero. The sparsity penalty
    /// (lambda2) is too large for this dataset.
    #[error("all variable weights eliminated (lambda2 too large)")]
    DegenerateWeights,

    /// The weighted robust between-cluster sum of squares was not strictly
    /// positive, so its logarithm is undefined.
    #[error("degenerate structure: weighted robust BCSS is not positive ({value})")]
    DegenerateStructure { value: f64 },

    /// A (lambda1, lambda2) pair could not be evaluated because a fit on the
    /// original or a permuted dataset ended in a degenerate state.
    #[error("infeasible tuning point: lambda1={lambda1}, lambda2={lambda2}: {reason}")]
    InfeasibleLambda {
        lambda1: f64,
        lambda2: f64,
        reason: String,
    },

    /// Every grid point of a tuning sweep was infeasible.
    #[error("tuning failed: {0}")]
    TuningFailed(String),
}

pub type Result<T> = std::result::Result<T, ArskError>;
