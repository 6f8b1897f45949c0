use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("every block fell below the silence threshold")]
    EmptyAfterVad,

    #[error("signal too short: {len} samples, need at least {frame_len}")]
    SignalTooShort { len: usize, frame_len: usize },

    #[error("degenerate frame: {0}")]
    DegenerateFrame(&'static str),

    #[error("no usable frames ({skipped} skipped as degenerate)")]
    NoUsableFrames { skipped: usize },

    #[error("insufficient training data: {have} vectors for {need} components")]
    InsufficientData { have: usize, need: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty feature stream: {0}")]
    EmptyFeatureStream(&'static str),

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("sample rate mismatch: expected {expected} Hz, found {found} Hz")]
    SampleRateMismatch { expected: u32, found: u32 },

    #[error("unstable all-pole filter for speaker {0}")]
    UnstableFilter(String),

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("no model for speaker {0}")]
    MissingModel(String),

    #[error("model store: {0}")]
    Store(String),

    #[error("model file checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u32, computed: u32 },

    #[error("speaker {speaker}, utterance {utterance}: {source}")]
    Utterance {
        speaker: String,
        utterance: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error("config: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_utterance(self, speaker: &str, utterance: &str) -> Self {
        Error::Utterance {
            speaker: speaker.to_owned(),
            utterance: utterance.to_owned(),
            source: Box::new(self),
        }
    }
}
