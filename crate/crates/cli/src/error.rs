use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Numeric(#[from] pointspec::Error),

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 0 success, 2 config or validation, 3 numerical failure, 1 output I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Read { .. } => 2,
            CliError::Numeric(e) if e.is_validation() => 2,
            CliError::Numeric(_) => 3,
            CliError::Write { .. } | CliError::Csv(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
