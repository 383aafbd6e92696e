//! Rank datasets: aligned groups of images at several perceptual levels,
//! per-reference rank labels (1 = best), a reference-level train/val split
//! and a pair sampler for Siamese training.
//!
//! Three recipes build a [`RankDatasetManifest`]:
//! [`build_sr_rankset`] (SR outputs labeled by a metric),
//! [`build_interp_rankset`] (blends between an SR output and ground truth)
//! and [`build_distortion_rankset`] (blur and noise ladders).

mod build;
mod error;
mod labels;
mod manifest;
mod sample;

pub use crate::build::{
    build_distortion_rankset, build_interp_rankset, build_sr_rankset, split_refs, BuildOptions,
    LevelScores,
};
pub use crate::error::RankDataError;
pub use crate::labels::{assign_labels, LabelStrategy, Labeling};
pub use crate::manifest::{
    LabelEntry, LevelImage, PatchRef, PatchSpec, RankDatasetManifest, RankLevel, RefInfo, Source,
    Split, Tie,
};
pub use crate::sample::{sample_pair, ImageStore, PairSampler, RankPairRecord};

pub type Result<T, E = RankDataError> = std::result::Result<T, E>;
