use std::path::Path;

use fusecraft::{ConfigError, FusionError, ImageError};
use thiserror::Error;

/// Everything that ends a command early. The variant decides the exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Engine(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Engine(_) => 4,
        }
    }

    pub fn write(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("cannot write {}: {err}", path.display()))
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Engine(other.to_string()),
        }
    }
}

impl From<FusionError> for CliError {
    fn from(e: FusionError) -> Self {
        match e {
            FusionError::Config(c) => c.into(),
            other => CliError::Engine(other.to_string()),
        }
    }
}
