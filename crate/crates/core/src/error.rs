use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point lies on the camera's principal plane (|w| = {0:e})")]
    DegenerateProjection(f64),

    #[error("horizon is vertical within the image (normal angle {theta:.9} rad)")]
    VerticalHorizon { theta: f64 },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("insufficient cameras: need at least {needed}, got {got}")]
    InsufficientCameras { needed: usize, got: usize },

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate bins: edges {index} and {next} coincide at {value}")]
    DegenerateBins { index: usize, next: usize, value: f64 },

    #[error("no external grid for image `{0}`")]
    MissingExternalGrid(String),

    #[error("every candidate horizon scores the probability floor in all subwindows")]
    DegenerateDistribution,

    #[error("no prediction for image `{0}`")]
    MissingPrediction(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }
}
