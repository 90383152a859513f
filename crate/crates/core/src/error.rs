use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the geometry and processing stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path} at byte {offset}: {message}")]
    Format {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("unsupported geometry in node `{node}`: {message}")]
    UnsupportedGeometry { node: String, message: String },

    #[error("degenerate shape: {0}")]
    DegenerateShape(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("alignment error: {parts} parts but {boxes} boxes")]
    Alignment { parts: usize, boxes: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("incompatible voxel grids: {0}")]
    IncompatibleGrids(String),

    #[error("no geometry: every part is empty")]
    NoGeometry,

    #[error("missing reference latent for frozen part {0}")]
    MissingReference(usize),

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
