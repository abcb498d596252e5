use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("malformed ROI list, line {line}: {reason}")]
    RoiSyntax { line: usize, reason: String },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no signal: every pixel is below the detection floor")]
    NoSignal,

    #[error("degenerate features: {distinct} distinct feature values cannot form {k} clusters")]
    DegenerateFeatures { distinct: usize, k: usize },

    #[error("degenerate background: background ROI has zero variance")]
    DegenerateBackground,

    #[error("degenerate ROI {index}: combined ROI and background variance is zero")]
    DegenerateRoi { index: usize },

    #[error("no edge content: Laplacian response is constant")]
    NoEdgeContent,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
