use std::path::PathBuf;

use ranksr_core::ImagingError;
use ranksr_metrics::MetricError;
use ranksr_nn::NnError;
use ranksr_rankdata::RankDataError;

#[derive(Debug, thiserror::Error)]
pub enum RankerError {
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Data(#[from] RankDataError),
    #[error(transparent)]
    Checkpoint(#[from] NnError),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("input {height}x{width} is smaller than the {min}x{min} minimum")]
    Undersized {
        height: usize,
        width: usize,
        min: usize,
    },
    #[error("expected {expected} channels, got {got}")]
    Channels { got: usize, expected: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("regression training needs metric scores for every item")]
    NoScores,
    #[error("validation split has {0} items, need at least 2")]
    TooFewVal(usize),
    #[error("non-finite loss at iteration {iter}; last good checkpoint: {checkpoint:?}")]
    Diverged {
        iter: u64,
        checkpoint: Option<PathBuf>,
    },
    #[error("non-finite ranker score")]
    NonFinite,
    #[error("class {0} has no images")]
    EmptyClass(String),
    #[error("bad checkpoint: {0}")]
    Format(String),
}
