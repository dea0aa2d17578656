use thiserror::Error;

use crate::dataset::Label;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node {0}")]
    UnknownNode(String),

    #[error("pair ({0}, {0}) is not a valid relationship: endpoints must differ")]
    SelfPair(usize),

    #[error("invalid edge weight {0}: expected one of -2, -1, 1, 2")]
    InvalidWeight(i64),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("training error: {0}")]
    Training(String),

    #[error("not found: {0}")]
    NotFound(String),

    /// The labels contain a single class, so balanced accuracy is undefined.
    /// `recall` is the recall of the class that is present.
    #[error("degenerate test set: only {present:?} present (recall {recall:.4})")]
    DegenerateClass { present: Label, recall: f64 },

    #[error("model format error: {0}")]
    Format(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
