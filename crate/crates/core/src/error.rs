use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the screening pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error in {path}: {message}")]
    Schema { path: String, message: String },

    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("invalid dataset spec: {0}")]
    Spec(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("no MGP tender matches MSD tenders at: {}", .0.join(", "))]
    Join(Vec<String>),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("feature schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("model container error: {0}")]
    Model(String),

    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// True for errors caused by user-supplied files, specs or arguments,
    /// false for failures inside the pipeline itself.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Internal(_) | Error::Write { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
