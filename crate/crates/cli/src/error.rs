use std::process::ExitCode;

use delta_core::ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("input error: {0}")]
    Input(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl CliError {
    pub fn input(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{context}: {err}"))
    }

    /// 2 usage, 3 config, 4 input, 5 singular, 6 infeasible, 7 fit.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Input(_) => 4,
            CliError::Model(e) => match e {
                ModelError::Domain { .. } | ModelError::OutOfRange { .. } | ModelError::Config(_) => 3,
                ModelError::Bench(_) => 4,
                ModelError::Singular { .. } => 5,
                ModelError::Unreachable { .. } | ModelError::EmptyWorkspace(_) => 6,
                ModelError::Fit(_) => 7,
            },
        }
    }
}

impl From<&CliError> for ExitCode {
    fn from(e: &CliError) -> Self {
        ExitCode::from(e.exit_code())
    }
}
