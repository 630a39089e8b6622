//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by any ctclab operation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {reason}")]
    ManifestParse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}:{line}: duplicate utterance id `{id}`")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },

    #[error("{path}: {reason}")]
    BadFeatureFile { path: PathBuf, reason: String },

    #[error("unknown character {ch:?} at position {position} in transcript")]
    UnknownCharacter { ch: char, position: usize },

    #[error("no LID symbol for language `{lang}` in vocabulary")]
    UnknownLanguage { lang: String },

    #[error("anchor language `{lang}` missing from available data")]
    MissingAnchor { lang: String },

    #[error("wordlists `{a}` and `{b}` share no concepts")]
    NoSharedConcepts { a: String, b: String },

    #[error("target infeasible: {frames} frames cannot emit {required} extended labels")]
    Infeasible { frames: usize, required: usize },

    #[error("blank index {blank} appears in target at position {position}")]
    BlankInTarget { blank: usize, position: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("non-finite gradient in {block}")]
    NonFiniteGradient { block: String },

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("checkpoint {path}: {reason}")]
    BadCheckpoint { path: PathBuf, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Wrap an I/O error with the path it concerns.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code the CLI maps this error to: 1 for input/validation
    /// problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::NonFiniteGradient { .. }
            | Error::NonFiniteLoss { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
