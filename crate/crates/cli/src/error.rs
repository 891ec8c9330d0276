//! CLI error type with stable process exit codes.

use arsk_core::ArskError;
use thiserror::Error;

/// Exit codes: 0 success, 2 parse/config, 3 degenerate-weights,
/// 4 non-convergence, 5 tuning-failed.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    DegenerateWeights(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("{0}")]
    TuningFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::DegenerateWeights(_) => 3,
            CliError::NonConvergence(_) => 4,
            CliError::TuningFailed(_) => 5,
        }
    }
}

impl From<ArskError> for CliError {
    fn from(e: ArskError) -> Self {
        match e {
            ArskError::DegenerateWeights => CliError::DegenerateWeights(format!(
                "{e}; lambda2 is too large for this dataset"
            )),
            ArskError::TuningFailed(_)
            | ArskError::InfeasibleLambda { .. }
            | ArskError::DegenerateStructure { .. } => CliError::TuningFailed(e.to_string()),
            other => CliError::Parse(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Parse(format!("JSON error: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
