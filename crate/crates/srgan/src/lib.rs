//! Super-resolution GAN with rank-content guidance: a residual generator,
//! a VGG-style discriminator, a frozen VGG-19 feature extractor, the loss
//! terms and their composition, pretraining and GAN training loops with
//! exact resume, and tiled inference.

mod ckpt;
mod data;
mod discriminator;
mod error;
mod extractor;
mod generator;
mod infer;
pub mod losses;
mod train;

pub use crate::ckpt::{
    load_discriminator, load_generator, save_discriminator, save_generator, FORMAT_VERSION,
};
pub use crate::data::{bicubic_upscale, validate, PairedSet};
pub use crate::discriminator::{prob_from_logit, Discriminator, DiscriminatorConfig};
pub use crate::error::{Result, SrError};
pub use crate::extractor::{ExtractorConfig, FeatureExtractor, Tap};
pub use crate::generator::{generator_forward, Generator, GeneratorConfig, MIN_LR_SIDE, SCALE};
pub use crate::infer::{infer_dir, infer_sr, TileConfig};
pub use crate::losses::{
    adversarial_losses, perceptual_loss, rank_content_loss, total_generator_loss, LossParts,
    LossWeights, Monotone,
};
pub use crate::train::{
    multistep_lr, pretrain_srresnet, read_train_log, train_ranksrgan, write_train_log,
    GanTrainConfig, GanTrainer, PretrainConfig, PretrainOutcome, TrainLogRecord,
};
