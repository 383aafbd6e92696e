//! The Siamese ranker: a VGG-style scorer whose two shared-weight branches
//! are trained with a margin-ranking loss so that its scores reproduce the
//! orderings of a perceptual metric (lower score = better quality).

mod arch;
mod error;
mod eval;
pub mod loss;
mod model;
mod train;

pub use crate::arch::{Arch, RankerConfig};
pub use crate::error::RankerError;
pub use crate::eval::{
    class_separation_report, separation_from_scores, ClassStats, SeparationReport,
};
pub use crate::loss::{margin_rank_grad, margin_rank_loss, regression_loss};
pub use crate::model::{RankerModel, TrainingMeta};
pub use crate::train::{
    eval_srocc, train_ranker, write_log, LogRecord, RankerTrainConfig, TrainMode, TrainOutcome,
};

pub type Result<T, E = RankerError> = std::result::Result<T, E>;
