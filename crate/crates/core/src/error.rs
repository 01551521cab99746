//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: unsupported audio: {reason}")]
    UnsupportedAudio { path: PathBuf, reason: String },

    /// The pipeline constants are tied to 44.1 kHz; other rates are rejected
    /// rather than silently resampled.
    #[error("unsupported sample rate: {got} Hz (expected {expected} Hz)")]
    UnsupportedSampleRate { got: u32, expected: u32 },

    #[error("invalid audio buffer: {0}")]
    InvalidClip(String),

    #[error("{path}: contour file: {reason}")]
    ContourFormat { path: PathBuf, reason: String },

    #[error("{path}: {reason}")]
    CsvFormat { path: PathBuf, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A pipeline stage failed; carries the stage name for diagnostics.
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
