use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point lies behind the camera (z-depth {depth})")]
    PointBehindCamera { depth: f64 },

    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f64),

    #[error("ray direction is not unit length (|d| = {0})")]
    NonUnitDirection(f64),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("invalid transform spec: {0}")]
    InvalidSpec(String),

    #[error("degenerate dolly zoom: delta {delta} must stay below anchor depth {anchor_depth}")]
    DegenerateDolly { delta: f64, anchor_depth: f64 },

    #[error("image of {height}x{width} is not divisible into {patch}x{patch} patches")]
    IndivisibleImage {
        height: usize,
        width: usize,
        patch: usize,
    },

    #[error("mask selects no pixels")]
    EmptyMask,

    #[error("image of {height}x{width} is smaller than the {window}x{window} window")]
    TooSmall {
        height: usize,
        width: usize,
        window: usize,
    },

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("malformed JSON in {}: {message}", path.display())]
    MalformedJson { path: PathBuf, message: String },

    #[error("camera convention mismatch: {0}")]
    ConventionMismatch(String),

    #[error("malformed header in {}: {message}", path.display())]
    MalformedHeader { path: PathBuf, message: String },

    #[error("unknown view id {0:?}")]
    UnknownView(String),

    #[error("output {} already exists (use --force to replace it)", .0.display())]
    OutputExists(PathBuf),

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error at {}: {message}", path.display())]
    Codec { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(expected: impl std::fmt::Display, actual: impl std::fmt::Display) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
