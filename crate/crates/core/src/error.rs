use std::path::PathBuf;

use thiserror::Error;

/// Failures reading or writing binary PLY scenes.
#[derive(Debug, Error)]
pub enum PlyError {
    #[error("not a PLY file (missing magic line)")]
    NotPly,
    #[error("unsupported PLY format `{0}`; only binary_little_endian 1.0 is read")]
    UnsupportedFormat(String),
    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),
    #[error("unsupported type `{ty}` for property `{property}`")]
    UnsupportedPropertyType { property: String, ty: String },
    #[error("missing mandatory vertex property `{0}`")]
    MissingField(String),
    #[error("payload truncated at vertex {vertex} while reading `{field}`")]
    Truncated { field: String, vertex: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Ply(#[from] PlyError),
    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("image of {width}x{height} exceeds the supported size")]
    ImageTooLarge { width: usize, height: usize },
    #[error("frame does not belong to this scene and view: {0}")]
    FrameMismatch(String),
    #[error("entry {index}: {message}")]
    Entry { index: usize, message: String },
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn dims(expected: (usize, usize), actual: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            expected: format!("{}x{}", expected.0, expected.1),
            actual: format!("{}x{}", actual.0, actual.1),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
