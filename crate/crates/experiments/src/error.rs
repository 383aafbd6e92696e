use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error(transparent)]
    Imaging(#[from] ranksr_core::ImagingError),
    #[error(transparent)]
    Metric(#[from] ranksr_metrics::MetricError),
    #[error(transparent)]
    Data(#[from] ranksr_rankdata::RankDataError),
    #[error(transparent)]
    Ranker(#[from] ranksr_ranker::RankerError),
    #[error(transparent)]
    Sr(#[from] ranksr_srgan::SrError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("score reports are not aligned: {0}")]
    Misaligned(String),
    #[error("scores must be LOWER_BETTER")]
    Polarity,
    #[error("nothing to plot: {0}")]
    EmptySeries(String),
    #[error("plot: {0}")]
    Plot(String),
    #[error("stage {stage} failed: {reason}")]
    Stage { stage: String, reason: String },
    #[error("format: {0}")]
    Format(String),
}

impl ExpError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, ExpError>;
