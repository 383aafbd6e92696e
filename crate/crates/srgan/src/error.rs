use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SrError {
    #[error(transparent)]
    Imaging(#[from] ranksr_core::ImagingError),
    #[error(transparent)]
    Metric(#[from] ranksr_metrics::MetricError),
    #[error(transparent)]
    Ranker(#[from] ranksr_ranker::RankerError),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] ranksr_nn::NnError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("input {height}x{width} is below the minimum side {min}")]
    Undersized {
        height: usize,
        width: usize,
        min: usize,
    },
    #[error("expected {expected} channels, got {got}")]
    Channels { got: usize, expected: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("no training images")]
    EmptyData,
    #[error("non-finite {what} at iteration {iter} (L_P {l_p}, L_G {l_g}, L_R {l_r}, L_M {l_m}, L_D {l_d})")]
    NonFinite {
        what: &'static str,
        iter: u64,
        l_p: f64,
        l_g: f64,
        l_r: f64,
        l_m: f64,
        l_d: f64,
    },
    #[error("frozen network {0} changed during training")]
    FrozenModified(&'static str),
    #[error("bad checkpoint: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, SrError>;
