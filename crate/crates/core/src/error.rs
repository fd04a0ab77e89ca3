use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A text whose embedding could not be found in the embedding store.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MissingText {
    /// Lowercase hex SHA-256 of the UTF-8 text.
    pub key: String,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {reason}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("unknown label {label}")]
    UnknownLabel { label: usize },

    #[error("empty text in record {index}")]
    EmptyText { index: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid label map: {0}")]
    InvalidLabelMap(String),

    #[error("invalid embedding store: {0}")]
    InvalidStore(String),

    #[error("missing embeddings for {} text(s)", .0.len())]
    MissingEmbedding(Vec<MissingText>),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("non-finite embedding produced (divergent adapter?)")]
    NonFiniteEmbedding,

    #[error("contrastive training undefined: all examples share one label")]
    SingleLabelPairs,

    #[error("degenerate projection: zero-norm projected vector for example {index}")]
    DegenerateProjection { index: usize },

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("k = {k} too large for {available} eligible rows")]
    KTooLarge { k: usize, available: usize },

    #[error("empty index")]
    EmptyIndex,

    #[error("decoration needs at least 2 training examples, got {0}")]
    TooFewExamples(usize),

    #[error("single-class input: classifier needs at least two labels")]
    SingleClass,

    #[error("non-finite loss in classifier fit")]
    NonFiniteLoss,

    #[error("empty model")]
    EmptyModel,

    #[error("average precision needs at least one positive label")]
    NoPositives,

    #[error("non-binary label {0} passed to a binary metric")]
    NonBinaryLabel(usize),

    #[error("insufficient pool for label {label}: need {needed}, have {available}")]
    InsufficientPool {
        label: usize,
        needed: usize,
        available: usize,
    },

    #[error("ragged result grid: {0}")]
    RaggedGrid(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status used by the command-line front end.
    ///
    /// `2` means embeddings are pending, `3` means numeric divergence, and
    /// everything else is reported as a configuration/input error (`1`).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingEmbedding(_) => 2,
            Error::Divergence(_) | Error::NonFiniteEmbedding | Error::NonFiniteLoss => 3,
            _ => 1,
        }
    }
}
