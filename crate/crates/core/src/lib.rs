//! Adaptively robust and sparse k-means.
//!
//! Clustering that simultaneously absorbs row-wise outliers into a
//! penalized error matrix and selects variables through penalized weights,
//! with robust Gap-statistic hyperparameter search, a contaminated
//! Gaussian-mixture generator, and evaluation metrics.

pub mod arsk;
mod error;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod simgen;
pub mod threshold;
pub mod tuning;
mod util;
pub mod wkmeans;

pub use error::{ArskError, Result};
pub use model::{
    validate, ClusterModel, DataMatrix, ErrorMatrix, FitResult, PenaltyKind, PenaltySpec,
    WeightVector,
};
