use std::path::PathBuf;
use thiserror::Error;

/// Error taxonomy mirroring the exit codes: I/O failures exit 2, parse
/// and validation failures exit 1. Scene generation shares the I/O code
/// because a placement failure means the request cannot be materialized.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error in {path} at {location}: {detail}")]
    Parse {
        path: PathBuf,
        location: String,
        detail: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("generation failed: {0}")]
    Generation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Generation(_) => 2,
            CliError::Parse { .. } | CliError::Validation(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
