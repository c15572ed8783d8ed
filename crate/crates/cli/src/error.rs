use std::path::PathBuf;

use delay_blowup::blowup::BlowupError;
use delay_blowup::integrator::IntegratorError;
use delay_blowup::model::ModelError;
use delay_blowup::periodic::PeriodicError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<PeriodicError> for CliError {
    fn from(e: PeriodicError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<IntegratorError> for CliError {
    fn from(e: IntegratorError) -> Self {
        match e {
            IntegratorError::InvalidOptions(_)
            | IntegratorError::HistorySpanMismatch { .. }
            | IntegratorError::EmptySpan(..) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<BlowupError> for CliError {
    fn from(e: BlowupError) -> Self {
        match e {
            BlowupError::Model(m) => m.into(),
            BlowupError::Integrator(i) => i.into(),
            BlowupError::BracketInvalid(_) => CliError::Usage(e.to_string()),
            BlowupError::InsufficientTail { .. } | BlowupError::Numerical(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}
