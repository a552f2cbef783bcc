use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("sample-count mismatch in {file}: expected {expected} values, found {found}")]
    SampleCountMismatch {
        file: String,
        expected: usize,
        found: usize,
    },

    #[error("unknown channel label '{0}'")]
    UnknownChannel(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("insufficient pre-onset margin: event at sample {onset} needs {needed} samples before onset")]
    InsufficientMargin { onset: usize, needed: usize },

    #[error("event at sample {onset} runs past the end of the recording ({len} samples)")]
    EventPastEnd { onset: usize, len: usize },

    #[error("non-integer decimation: {fs_in} Hz -> {fs_out} Hz")]
    NonIntegerDecimation { fs_in: f64, fs_out: f64 },

    #[error("signal too short: {len} samples, need more than {needed}")]
    SignalTooShort { len: usize, needed: usize },

    #[error("temporal dimension underflow: {0}")]
    TemporalUnderflow(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("non-finite gradient in layer '{0}'")]
    NonFiniteGradient(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("degenerate pairing: {0}")]
    DegeneratePairing(String),

    #[error("grid exhaustion: {0}")]
    GridExhausted(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad parameters rather than bad data.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::NonIntegerDecimation { .. }
                | Error::TemporalUnderflow(_)
                | Error::GridExhausted(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
