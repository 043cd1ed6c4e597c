use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid term URI {0:?}: expected a non-empty absolute IRI")]
    InvalidTerm(String),

    #[error("empty label")]
    EmptyLabel,

    #[error("duplicate field {0:?} in one instance")]
    DuplicateField(String),

    #[error("instance has no template id")]
    MissingTemplate,

    #[error("malformed mapping record: {0}")]
    MalformedRecord(String),

    #[error("no instances for template {0:?}")]
    UnknownTemplate(String),

    #[error("training count {train_count} is smaller than rule support {support}")]
    InvalidCount { support: u64, train_count: u64 },

    #[error("no training count recorded for template {0:?}")]
    MissingTrainCount(String),

    #[error("target field {0:?} is already present in the context")]
    TargetInContext(String),

    #[error("instance has no value for target field {0:?}")]
    TargetMissing(String),

    #[error("repository is empty")]
    EmptyRepository,

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
