use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    DimensionMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("non-finite value in {what} at row {row}, column {col}")]
    NonFinite {
        what: &'static str,
        row: usize,
        col: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("layer {layer} is degenerate: {reason}")]
    DegenerateLayer { layer: usize, reason: String },

    #[error("network has no trained output layer")]
    Untrained,

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("{path}: row {row} (line {line}), column {column}: {message}")]
    Csv {
        path: String,
        row: usize,
        line: u64,
        column: String,
        message: String,
    },

    #[error("model file {path}: {message}")]
    ModelFormat { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
