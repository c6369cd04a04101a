use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed record: {detail}")]
    MalformedRecord { line: usize, detail: String },

    #[error("line {line}: invalid UTF-8")]
    InvalidUtf8 { line: usize },

    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { id: String, line: usize },

    #[error("line {line}: record {id:?} has label {value}, expected 0 or 1")]
    InvalidLabel { id: String, line: usize, value: i64 },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("size mismatch in {what}: expected {expected} bytes, found {actual}")]
    SizeMismatch { what: String, expected: u64, actual: u64 },

    #[error("dimension mismatch: expected {expected}, found {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unknown id {0:?}")]
    UnknownId(String),

    #[error("id mismatch at position {position}: {left:?} vs {right:?}")]
    IdMismatch {
        position: usize,
        left: String,
        right: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("degenerate training set: {0}")]
    DegenerateTrainingSet(String),

    #[error("loss became NaN at epoch {epoch}")]
    NanLoss { epoch: usize },

    #[error("embedding service failed for sample {sample_id:?} after {attempts} attempts: {detail}")]
    External {
        sample_id: String,
        attempts: usize,
        detail: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
