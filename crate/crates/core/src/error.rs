use std::path::PathBuf;

/// Errors produced by the geometry, simulation and planning routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("mesh is not closed: {0}")]
    OpenMesh(String),

    #[error("mesh has non-positive volume {0:.3e} (inverted orientation?)")]
    NonPositiveVolume(f64),

    #[error("no plane found (best inlier count {best})")]
    NoPlaneFound { best: usize },

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("object has zero extent along the requested direction")]
    DegenerateExtent,

    #[error("only {count} points pass the stability threshold (need at least 3)")]
    NoStablePoints { count: usize },

    #[error("no camera ray hit the mesh")]
    EmptyView,

    #[error("invalid value for `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
