use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("cell {cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: labeldp_sco::Error,
    },
    #[error(transparent)]
    Core(#[from] labeldp_sco::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl BenchError {
    /// Process exit code: 2 for malformed input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config { .. } | BenchError::Usage(_) => 2,
            _ => 1,
        }
    }
}
