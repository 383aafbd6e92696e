use std::path::PathBuf;

use ranksr_core::ImagingError;
use ranksr_metrics::MetricError;

#[derive(Debug, thiserror::Error)]
pub enum RankDataError {
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("a rank needs at least 2 levels, got {0}")]
    TooFewLevels(usize),
    #[error("level {level} is misaligned: {detail}")]
    Misaligned { level: String, detail: String },
    #[error("size mismatch for {ref_id}: {detail}")]
    SizeMismatch { ref_id: String, detail: String },
    #[error("interpolation coefficient must lie in [0, 1], got {0}")]
    BadLambda(f64),
    #[error("distortion magnitude must be finite and non-negative, got {0}")]
    BadMagnitude(f64),
    #[error("duplicate level {0}")]
    DuplicateLevel(String),
    #[error("no images in {0}")]
    EmptyDir(PathBuf),
    #[error("no score for {ref_id} at level {level}")]
    MissingScore { ref_id: String, level: String },
    #[error("split {0:?} is empty")]
    EmptySplit(crate::Split),
    #[error("bad manifest {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("invalid manifest: {0}")]
    Invalid(String),
}
