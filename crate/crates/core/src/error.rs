use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A WAV file violated the supported format. `field` names the offending
    /// header field (`riff`, `format`, `channels`, `bits_per_sample`, ...).
    #[error("unsupported wav {field}: {detail}")]
    Wav { field: &'static str, detail: String },

    #[error("manifest line {line}: {detail}")]
    Manifest { line: usize, detail: String },

    #[error("duplicate utterance id {id:?} (lines {first} and {second})")]
    DuplicateId {
        id: String,
        first: usize,
        second: usize,
    },

    #[error("signal too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The frame count cannot host any alignment of the target.
    #[error("infeasible ctc target: {frames} frames, need at least {required}")]
    Infeasible { frames: usize, required: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("id {id} out of range for vocabulary of size {size}")]
    IdOutOfRange { id: usize, size: usize },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("batch normalization has no running statistics yet")]
    NotTrained,

    #[error("backward called without a cached forward pass")]
    NoForwardCache,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
