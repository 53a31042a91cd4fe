use std::path::Path;

use thiserror::Error;

/// Process exit codes.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("incompatible inputs: {0}")]
    IncompatibleConfigs(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error(transparent)]
    Core(#[from] lais_core::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::IncompatibleConfigs(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::Core(lais_core::Error::Io(_)) => EXIT_IO,
            CliError::Core(e) if e.is_numeric() => EXIT_NUMERIC,
            CliError::Core(_) => EXIT_CONFIG,
        }
    }
}
