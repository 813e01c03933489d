use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("index {index} out of range for size {size}")]
    Index { index: usize, size: usize },

    #[error("invalid tape state: {0}")]
    State(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("record {index}: {message}")]
    Record { index: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("IOB error at position {position}: {message}")]
    Iob { position: usize, message: String },

    #[error("insufficient data: requested {requested}, available {available}")]
    InsufficientData { requested: usize, available: usize },

    #[error("grammar error: {0}")]
    Grammar(String),

    #[error("no output head for domain '{0}'")]
    MissingHead(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("no training data in any domain")]
    EmptyTraining,

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("unsupported checkpoint format version {0}")]
    CheckpointVersion(u64),

    #[error("embedding fingerprint mismatch: checkpoint has {expected}, table has {actual}")]
    FingerprintMismatch { expected: String, actual: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
