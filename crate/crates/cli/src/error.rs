use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),

    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unknown suite '{name}', expected one of: {known}")]
    UnknownSuite { name: String, known: String },

    #[error("solver failure at epsilon = {epsilon:e}: {source}")]
    Solver { epsilon: f64, source: kirchhoff_core::error::Error },

    #[error("thread pool: {0}")]
    Pool(String),
}

impl CliError {
    /// 2 for usage, configuration and output problems, 3 for solver failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
