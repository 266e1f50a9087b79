//! CLI error classification and process exit codes.

use std::process::ExitCode;

/// Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] anyhow::Error),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Data(_) => ExitCode::from(3),
            CliError::Numeric(_) => ExitCode::from(4),
        }
    }
}

impl From<siamrae_core::Error> for CliError {
    fn from(e: siamrae_core::Error) -> Self {
        match e {
            siamrae_core::Error::NonFinite(msg) => CliError::Numeric(msg.to_string()),
            other => CliError::Data(anyhow::anyhow!("{other}")),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;
