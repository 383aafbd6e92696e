//! No-reference and rank-correlation metrics.
//!
//! * [`niqe`]: the Natural Image Quality Evaluator, built from MSCN
//!   coefficients and asymmetric generalized Gaussian fits.
//! * [`srocc`]: Spearman rank-order correlation with average-rank ties.
//! * [`pi`] / [`fused_score`]: linear combinations of lower-is-better metrics.
//! * [`batch_score`]: directory scoring into persisted [`ScoreReport`]s.

mod aggd;
mod error;
mod fusion;
mod linalg;
mod mscn;
mod niqe;
mod report;
mod srocc;

pub use crate::aggd::{aggd_fit, AggdParams};
pub use crate::error::MetricError;
pub use crate::fusion::{fused_score, pi, MetricSpec, Polarity, Transform};
pub use crate::mscn::{gaussian_window, mscn, mscn_plane, CoefficientMap};
pub use crate::niqe::{fit_pristine, niqe, niqe_features, NiqeConfig, NiqeMetric, NiqeModel};
pub use crate::report::{
    batch_score, ingest_scores, list_images, read_score_file, write_score_file, ImageMetric,
    Provenance, ScoreReport, Skipped,
};
pub use crate::srocc::{average_ranks, srocc};

pub type Result<T, E = MetricError> = std::result::Result<T, E>;
