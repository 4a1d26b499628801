use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("would create cycle")]
    WouldCreateCycle,
    #[error("cannot cut a root vertex")]
    CutRoot,
    #[error("empty effective instance")]
    EmptyInstance,
    #[error("internal error: {0}")]
    Internal(String),
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}

/// Reads a whole text file, naming the path on failure.
pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::File { path: path.to_path_buf(), source })
}

pub type Result<T> = std::result::Result<T, Error>;
