use std::path::PathBuf;

/// Errors produced by the drawing pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mesh not found: {0}")]
    MeshNotFound(PathBuf),

    #[error("failed to parse mesh {path}: {reason}")]
    MeshParse { path: PathBuf, reason: String },

    #[error("no faces")]
    NoFaces,

    #[error("zero-extent mesh: all vertices coincide")]
    ZeroExtent,

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("undefined Chamfer distance: {0} drawing is empty")]
    UndefinedChamfer(&'static str),

    #[error("need at least {needed} items, got {got}")]
    TooFew { needed: usize, got: usize },

    #[error("empty grid")]
    EmptyGrid,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),

    #[error("scorer failure: {0}")]
    Scorer(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
