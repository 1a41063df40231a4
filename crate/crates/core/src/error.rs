use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty waveform")]
    EmptyWaveform,

    #[error("invalid sample at index {index}: {value} (must be finite and within [-1, 1])")]
    InvalidSample { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("sequence of length {len} is shorter than the analysis window ({window})")]
    SequenceTooShort { len: usize, window: usize },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("contour has no voiced frames")]
    NoVoicedFrames,

    #[error("dimension {dim} has zero variance")]
    ZeroVariance { dim: usize },

    #[error("unknown {family} strategy `{name}` (available: {available})")]
    UnknownStrategy {
        family: &'static str,
        name: String,
        available: String,
    },

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("unsupported audio in {path}: {reason}")]
    UnsupportedAudio { path: PathBuf, reason: String },

    #[error("missing feature files: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingFeatures(Vec<PathBuf>),

    #[error("malformed feature file {path}: {reason}")]
    MalformedFeatures { path: PathBuf, reason: String },

    #[error("{0}")]
    Analysis(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
}

impl Error {
    /// True when the error reflects bad user input (configuration, manifest,
    /// malformed files) rather than a failure while processing valid input.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::UnknownStrategy { .. }
                | Error::Manifest(_)
                | Error::Json { .. }
                | Error::MissingFeatures(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
