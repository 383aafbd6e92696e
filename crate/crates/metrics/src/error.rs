use std::path::PathBuf;

use ranksr_core::ImagingError;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error("expected a single-channel image, got {0} channels")]
    NotGray(usize),
    #[error("degenerate sample set: {0}")]
    Degenerate(&'static str),
    #[error("image {height}x{width} too small for {block}px blocks")]
    TooSmall {
        height: usize,
        width: usize,
        block: usize,
    },
    #[error("pooled covariance is singular after regularization")]
    Singular,
    #[error("need at least {need} usable blocks, got {got}")]
    InsufficientBlocks { need: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} items, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("non-finite input")]
    NonFinite,
    #[error("missing score for metric `{0}`")]
    MissingMetric(String),
    #[error("duplicate image id `{0}`")]
    DuplicateId(String),
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed document {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl MetricError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MetricError::Io {
            path: path.into(),
            source,
        }
    }
}
