use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{0} already holds a run manifest; pass --force to overwrite")]
    Exists(PathBuf),

    #[error("numerical failure: {0}")]
    Numerical(#[from] parity_qst::QstError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical or output failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Exists(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}
