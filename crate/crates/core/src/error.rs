//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported or unreadable wav file {path}: {detail}")]
    Wav { path: PathBuf, detail: String },

    #[error("unsupported sample rate {0} Hz (expected 16000, 22050, 44100 or 48000)")]
    UnsupportedSampleRate(u32),

    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),

    #[error("invalid analysis config: {0}")]
    InvalidConfig(String),

    #[error("waveform shorter than one analysis frame ({len} < {frame_length} samples)")]
    WaveformTooShort { len: usize, frame_length: usize },

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("invalid alignment: {0}")]
    InvalidAlignment(String),

    #[error("track mismatch: {0}")]
    TrackMismatch(String),

    #[error("invalid features: {0}")]
    InvalidFeatures(String),

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("mix error: {0}")]
    Mix(String),

    #[error("adaptor error: {0}")]
    Adaptor(String),

    #[error("training diverged at step {step}: {term} is {value}")]
    Divergence { step: u64, term: String, value: f64 },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },
}

impl Error {
    /// Wrap an io::Error with the path it occurred on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
