use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero-norm vector cannot be normalized")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("video {submission_id:?} has no frames")]
    EmptyVideo { submission_id: String },

    #[error(
        "video {submission_id:?}: frame indices must be strictly increasing ({prev} then {next})"
    )]
    FrameOrder {
        submission_id: String,
        prev: u32,
        next: u32,
    },

    #[error("bad magic bytes in {0}")]
    BadMagic(PathBuf),

    #[error("unsupported store format version {0}")]
    VersionUnsupported(u32),

    #[error("corrupt store: {0}")]
    CorruptManifest(String),

    #[error("unknown game {0:?}")]
    UnknownGame(String),

    #[error("embedder unavailable: {0}")]
    EmbedderUnavailable(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoFailure {
            path: path.into(),
            source,
        }
    }
}
