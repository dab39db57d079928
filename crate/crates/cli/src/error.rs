use std::path::PathBuf;

use thiserror::Error;

use crate::config::Problem;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration ({} problem(s))", .0.len())]
    Validation(Vec<Problem>),

    /// Outputs were written, but a check failed on `record`.
    #[error("invariant violated: {check}: {record}")]
    Invariant { check: String, record: String, run_dir: PathBuf },

    #[error(transparent)]
    Core(#[from] ergolab_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for configurations that do not validate, 3 for failed invariants
    /// (including constructions that miss a defining property), 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Invariant { .. } => 3,
            CliError::Core(ergolab_core::Error::Construction { .. }) => 3,
            _ => 1,
        }
    }
}
