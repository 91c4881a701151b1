use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("gradient tape has no {expected} record (found {found})")]
    MissingTape {
        expected: &'static str,
        found: &'static str,
    },

    #[error("trace does not belong to the current model parameters")]
    StaleTrace,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("parameter `{parameter}` is degenerate on the training split (min == max == {value})")]
    DegenerateParameter { parameter: &'static str, value: f64 },

    #[error("cannot ingest {path}: {reason}")]
    Ingest { path: PathBuf, reason: String },

    #[error("image decode failed: {0}")]
    Decode(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("checkpoint holds a {found} model, expected {expected}")]
    ArchitectureMismatch { expected: String, found: String },

    #[error("non-finite gradient in parameter {index} ({name})")]
    NonFinite { index: usize, name: String },

    #[error("rules error at {location}: {reason}")]
    Rules { location: String, reason: String },

    #[error("unknown symptom `{0}`")]
    UnknownSymptom(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
