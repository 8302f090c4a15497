use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (non-unit direction, unsorted splats, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("validation failed: {0}")]
    Validation(String),

    /// Malformed PLY content. `element` is the zero-based vertex index when the
    /// problem is tied to one record.
    #[error("PLY parse error{}: {message}", element.map(|i| format!(" at element {i}")).unwrap_or_default())]
    Ply {
        element: Option<usize>,
        message: String,
    },

    #[error("camera file parse error at {pointer}: {message}")]
    CameraJson { pointer: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error for {}: {message}", path.display())]
    Image { path: PathBuf, message: String },

    #[error("empty scene")]
    EmptyScene,

    #[error("threshold too high: no supervision")]
    NoSupervision,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
