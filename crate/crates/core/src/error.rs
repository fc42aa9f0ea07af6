use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("frame index {index} missing from sequence in {dir}")]
    MissingFrame { dir: PathBuf, index: u32 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("unreadable file {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },

    #[error("median window {window} exceeds sequence length {len}")]
    WindowTooLarge { window: usize, len: usize },

    #[error("expected {expected} channel(s), found {found}")]
    WrongChannelCount { expected: usize, found: usize },

    #[error("frame {width}x{height} too small for a {levels}-level pyramid")]
    TooSmallForPyramid {
        width: usize,
        height: usize,
        levels: usize,
    },

    #[error("tensor shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("max pooling needs even dimensions, got {height}x{width}")]
    OddDimensions { height: usize, width: usize },

    #[error("weights missing or malformed: {0}")]
    WeightsMissing(String),

    #[error("every pixel is missing, nothing to inpaint from")]
    AllPixelsMissing,

    #[error("background model not initialized")]
    NotInitialized,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid mask value {value} at ({x}, {y})")]
    InvalidMaskValue { x: usize, y: usize, value: u8 },

    #[error("unrecognized ground-truth label {value} at ({x}, {y})")]
    UnrecognizedLabel { x: usize, y: usize, value: u8 },

    #[error("no videos to aggregate for category {0:?}")]
    EmptyCategory(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dims(expected: impl std::fmt::Display, found: impl std::fmt::Display) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Process exit code for this failure class.
    ///
    /// 2 = I/O, 3 = numeric failure, 4 = precondition, 5 = data mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingFrame { .. }
            | Error::UnreadableFile { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_)
            | Error::WeightsMissing(_) => 2,
            Error::AllPixelsMissing => 3,
            Error::WindowTooLarge { .. }
            | Error::TooSmallForPyramid { .. }
            | Error::NotInitialized
            | Error::Precondition(_)
            | Error::OddDimensions { .. }
            | Error::EmptyCategory(_)
            | Error::Config(_) => 4,
            Error::DimensionMismatch { .. }
            | Error::WrongChannelCount { .. }
            | Error::ShapeMismatch(_)
            | Error::InvalidMaskValue { .. }
            | Error::UnrecognizedLabel { .. } => 5,
        }
    }
}
