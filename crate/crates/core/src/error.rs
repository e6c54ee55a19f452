use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the relocalization toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid depth at pixel ({x}, {y})")]
    InvalidDepth { x: i64, y: i64 },

    #[error("insufficient points: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("no real solution")]
    NoSolution,

    #[error("point is behind the camera")]
    BehindCamera,

    #[error("insufficient data: need at least {needed} correspondences, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("relocalization failed: {inliers} inliers, {required} required")]
    RelocalizationFailure { inliers: usize, required: usize },

    #[error("frame has no valid depth pixels")]
    EmptyFrame,

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    File { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::File {
            path: path.into(),
            message: message.into(),
        }
    }
}
