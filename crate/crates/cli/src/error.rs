use std::path::PathBuf;

use coefid::ErrorClass;
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

    #[error("{path}: {msg}")]
    Input { path: PathBuf, msg: String },

    #[error(transparent)]
    Solver(#[from] coefid::Error),
}

impl CliError {
    /// 2: hypothesis hard failure, 3: numerical breakdown, 4: config or input
    /// error, 1: failure to write results.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Read { .. } | CliError::Input { .. } => 4,
            CliError::Write { .. } => 1,
            CliError::Solver(e) => match e.class() {
                ErrorClass::Hypothesis => 2,
                ErrorClass::Numerical => 3,
                ErrorClass::Input => 4,
            },
        }
    }
}
