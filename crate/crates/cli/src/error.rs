use std::path::PathBuf;

use rectify_core::Error as CoreError;
use thiserror::Error;

/// Failures surfaced by the command line, each with a fixed exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}:{line}: expected {expected} columns, found {got}")]
    Dimension {
        path: PathBuf,
        line: u64,
        expected: String,
        got: usize,
    },
    #[error("{0}")]
    Mismatch(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } | CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Dimension { .. } | CliError::Mismatch(_) => 3,
            CliError::Hypothesis(_) => 4,
            CliError::Numerical(_) => 5,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let text = e.to_string();
        match e {
            CoreError::InvalidArgument(_) => CliError::Usage(text),
            CoreError::DimensionMismatch { .. } => CliError::Mismatch(text),
            CoreError::EmptySupport { .. }
            | CoreError::PlaneFitImpossible { .. }
            | CoreError::OutsideRoot { .. }
            | CoreError::NotDisjoint { .. } => CliError::Hypothesis(text),
            CoreError::EmptySet
            | CoreError::DependentDirections { .. }
            | CoreError::SeparationViolated { .. }
            | CoreError::EnergyInfinite
            | CoreError::QuadratureFailure { .. } => CliError::Numerical(text),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
