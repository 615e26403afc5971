use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("taxonomy line {line}: {msg}")]
    Taxonomy { line: usize, msg: String },

    #[error("invalid taxonomy: {0}")]
    InvalidTree(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("node `{node}` is in layer {actual}, expected layer {expected}")]
    LayerMismatch {
        node: String,
        expected: usize,
        actual: usize,
    },

    #[error("class index {index} out of range for layer {layer} ({classes} classes)")]
    ClassOutOfRange {
        layer: usize,
        index: usize,
        classes: usize,
    },

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("data line {line}: {msg}")]
    Data { line: usize, msg: String },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("checkpoint version mismatch: {0}")]
    Version(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidArgument(_) => 1,
            Error::NonFinite(_) => 3,
            _ => 2,
        }
    }
}
