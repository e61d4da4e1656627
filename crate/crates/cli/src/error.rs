use std::path::PathBuf;

use ruingame_core::ValidationReport;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("problem validation failed:\n{0}")]
    Validation(ValidationReport),

    #[error(transparent)]
    Core(#[from] ruingame_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Process exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    pub const VALIDATION: u8 = 1;
    pub const NUMERICAL: u8 = 2;
    pub const BREACH: u8 = 3;
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use ruingame_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Validation(_) => exit::VALIDATION,
            CliError::Core(E::InvalidArgument(_) | E::Domain { .. }) => exit::VALIDATION,
            CliError::Core(_) | CliError::Io { .. } => exit::NUMERICAL,
        }
    }
}
