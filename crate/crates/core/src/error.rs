use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the saliency pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate calibration: {0}")]
    DegenerateCalibration(String),

    #[error("no fixations to build a saliency map from")]
    EmptyFixations,

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("screen {0} has no ground-truth saliency")]
    MissingGroundTruth(String),

    #[error("unknown feature provider `{0}`")]
    UnknownProvider(String),

    #[error("invalid manifest (screen {screen}): {reason}")]
    Manifest { screen: String, reason: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Decode(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by numbers going wrong rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
