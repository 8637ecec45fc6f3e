use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("calibration records diverge: rotations {angle_deg:.1} degrees apart (limit 90)")]
    DivergentCalibration { angle_deg: f64 },

    #[error("invalid depth {0} (must be finite and > 0)")]
    InvalidDepth(f64),

    #[error("invalid disparity {0} (must be finite and > 0)")]
    InvalidDisparity(f64),

    #[error("point behind camera (z = {z}){}", corner.map(|i| format!(" at corner {i}")).unwrap_or_default())]
    BehindCamera { z: f64, corner: Option<usize> },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("disparity {value} at ({x}, {y}) does not fit in 8 bits after rounding")]
    RangeOverflow { value: f32, x: usize, y: usize },

    #[error("unsupported format: {0}")]
    Format(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("corrupt dataset: {0}")]
    CorruptDataset(String),

    #[error("channel {channel} has zero standard deviation")]
    DivideByZero { channel: usize },

    #[error("no valid ground-truth pixels to evaluate")]
    EmptyEvaluation,

    #[error("cannot pair predictions with ground truth: {0}")]
    Pairing(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid scene: {0}")]
    Scene(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Tiff(#[from] tiff::TiffError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.to_string(),
        }
    }
}
