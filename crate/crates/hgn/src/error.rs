//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HgnError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dataset is empty after filtering")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("negative sampling failed: {0}")]
    Sampling(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("evaluation produced no result: {0}")]
    Report(String),
}

impl HgnError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HgnError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 for configuration/validation
    /// problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HgnError::Config(_) => 1,
            _ => 2,
        }
    }
}
