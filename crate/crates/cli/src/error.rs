use std::path::PathBuf;

use crate::config::ConfigError;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Core(#[from] measuretherm_core::error::Error),

    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
}

impl RunError {
    /// Invariant violations raised inside a computation count as assertion
    /// failures; everything else is a configuration problem.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Core(measuretherm_core::error::Error::InvariantViolation(_)) => EXIT_ASSERTION,
            _ => EXIT_CONFIG,
        }
    }
}
