//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Temporal variance too small to condition on time.
    #[error("degenerate temporal variance {sigma_t:.3e} (threshold {threshold:.1e})")]
    DegenerateTemporal { sigma_t: f64, threshold: f64 },

    #[error("timestamp {0} outside [0, 1]")]
    TimeOutOfRange(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("data format: {0}")]
    DataFormat(String),

    #[error("image count mismatch: expected {expected}, found {found}")]
    CountMismatch { expected: usize, found: usize },

    #[error("timestamps not strictly increasing at index {0}")]
    NonMonotoneTimestamps(usize),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),
}

impl Error {
    /// True for errors caused by malformed or missing input data (as opposed
    /// to bad arguments or numeric breakdown). Drives the CLI exit-code split.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::DataFormat(_)
                | Error::CountMismatch { .. }
                | Error::NonMonotoneTimestamps(_)
                | Error::VersionMismatch { .. }
                | Error::Truncated(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::Codec(_)
        )
    }

    pub fn is_numeric_error(&self) -> bool {
        matches!(
            self,
            Error::NumericFailure(_) | Error::DegenerateTemporal { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
