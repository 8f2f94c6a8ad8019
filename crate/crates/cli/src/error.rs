use std::process::ExitCode;

use memaudit_core::Error as CoreError;
use memaudit_review::ReviewError;
use thiserror::Error;

/// Failures grouped by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Exit 2: bad flags, config or arguments.
    #[error("{0}")]
    Config(String),
    /// Exit 3: unreadable, unwritable or malformed files.
    #[error("{0}")]
    Io(String),
    /// Exit 4: a computation failed numerically.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        })
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::Io(_) | CoreError::Format(_) | CoreError::Json(_) => CliError::Io(msg),
            CoreError::InvalidInput(_) | CoreError::DimensionMismatch(_) => CliError::Config(msg),
            CoreError::Numerical(_) => CliError::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ReviewError> for CliError {
    fn from(e: ReviewError) -> Self {
        match e {
            ReviewError::Core(c) => c.into(),
            ReviewError::Io(_) | ReviewError::Bind { .. } | ReviewError::Render(_) => CliError::Io(e.to_string()),
            ReviewError::UnresolvedId(_) | ReviewError::NotFound(_) | ReviewError::BadRequest(_) => {
                CliError::Config(e.to_string())
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
