use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    /// Schema or parse failure; serde's message carries the field and the
    /// line/column.
    #[error("{}: {source}", path.display())]
    Config { path: PathBuf, source: serde_json::Error },

    #[error(transparent)]
    Core(#[from] markov_coder::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, CliError>;
