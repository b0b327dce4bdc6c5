use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("file error at {path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("guard: {0}")]
    Guard(String),
    #[error(transparent)]
    Core(#[from] forgeset::Error),
    #[error("{failed} of {total} evaluation cells failed (first: {first})")]
    CellsFailed {
        failed: usize,
        total: usize,
        first: String,
        numerical: bool,
    },
}

impl CliError {
    /// Process exit status: 2 config, 3 numerical failure, 4 guard violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::File { .. } => 2,
            CliError::Guard(_) => 4,
            CliError::Core(e) => core_exit_code(e),
            CliError::CellsFailed { numerical, .. } => {
                if *numerical {
                    3
                } else {
                    2
                }
            }
        }
    }
}

pub fn core_exit_code(e: &forgeset::Error) -> i32 {
    use forgeset::Error::*;
    match e {
        Bracket { .. } | NoConvergence { .. } | Divergence { .. } => 3,
        TooLarge(_) => 4,
        _ => 2,
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn file_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::File { path, source }
}
