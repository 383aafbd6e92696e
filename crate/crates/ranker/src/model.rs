use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ranksr_core::Image;
use ranksr_nn::{digest, he_init, Checkpoint, Module, Sequential, Tensor};
use serde::{Deserialize, Serialize};

use crate::{RankerConfig, RankerError, Result};

pub const FORMAT_VERSION: &str = "1";
const KIND: &str = "ranker";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub iterations: u64,
    pub metric_id: String,
    pub dataset_id: String,
}

/// Siamese scorer: one branch applied to each image of a pair.
/// Lower scores mean better perceptual quality.
#[derive(Debug, Clone)]
pub struct RankerModel {
    pub config: RankerConfig,
    pub net: Sequential<f32>,
    pub meta: TrainingMeta,
}

impl RankerModel {
    /// He-initialized weights from `seed`.
    pub fn new(config: RankerConfig, seed: u64) -> Self {
        let mut net = config.build();
        he_init(
            &mut net,
            config.leaky_slope,
            1.0,
            &mut ChaCha8Rng::seed_from_u64(seed),
        );
        Self {
            config,
            net,
            meta: TrainingMeta::default(),
        }
    }

    fn check(&self, img: &Image) -> Result<()> {
        let min = self.config.min_size();
        if img.height() < min || img.width() < min {
            return Err(RankerError::Undersized {
                height: img.height(),
                width: img.width(),
                min,
            });
        }
        if img.channels() != self.config.in_channels {
            return Err(RankerError::Channels {
                got: img.channels(),
                expected: self.config.in_channels,
            });
        }
        Ok(())
    }

    /// Evaluation-mode score of one image of any size above the minimum.
    pub fn score(&self, img: &Image) -> Result<f64> {
        self.check(img)?;
        Ok(self.net.infer(Tensor::from_image(img)).data[0] as f64)
    }

    /// Scores equally sized images in batches of `chunk`.
    pub fn score_batch(&self, images: &[&Image], chunk: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(images.len());
        for part in images.chunks(chunk.max(1)) {
            for img in part {
                self.check(img)?;
            }
            let y = self.net.infer(Tensor::from_images(part));
            out.extend(y.data.iter().map(|v| *v as f64));
        }
        Ok(out)
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    /// Hash of every weight and running statistic.
    pub fn digest(&self) -> String {
        digest(&self.net)
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new();
        ck.set_meta("format_version", FORMAT_VERSION);
        ck.set_meta("kind", KIND);
        ck.set_meta(
            "config",
            serde_json::to_string(&self.config).map_err(|e| RankerError::Format(e.to_string()))?,
        );
        ck.set_meta(
            "training_meta",
            serde_json::to_string(&self.meta).map_err(|e| RankerError::Format(e.to_string()))?,
        );
        ck.insert_module("net", &self.net);
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.meta("kind")? != KIND {
            return Err(RankerError::Format(format!(
                "checkpoint kind {} is not a ranker",
                ck.meta("kind")?
            )));
        }
        if ck.meta("format_version")? != FORMAT_VERSION {
            return Err(RankerError::Format(format!(
                "unsupported format_version {}",
                ck.meta("format_version")?
            )));
        }
        let config: RankerConfig = serde_json::from_str(ck.meta("config")?)
            .map_err(|e| RankerError::Format(e.to_string()))?;
        let meta: TrainingMeta = serde_json::from_str(ck.meta("training_meta")?)
            .map_err(|e| RankerError::Format(e.to_string()))?;
        let mut net = config.build();
        ck.load_module("net", &mut net)?;
        Ok(Self { config, net, meta })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(self.to_checkpoint()?.save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Arch;
    use ranksr_core::synthetic::dead_leaves;

    #[test]
    fn scores_are_deterministic_and_size_free() {
        let m = RankerModel::new(RankerConfig::new(Arch::Vgg8, 4), 3);
        let a = dead_leaves(40, 40, 1);
        assert_eq!(m.score(&a).unwrap(), m.score(&a).unwrap());
        assert!(m.score(&dead_leaves(24, 57, 2)).unwrap().is_finite());
        assert!(matches!(
            m.score(&dead_leaves(7, 40, 2)),
            Err(RankerError::Undersized { .. })
        ));
        let b = dead_leaves(40, 40, 5);
        let batch = m.score_batch(&[&a, &b], 1).unwrap();
        assert!((batch[0] - m.score(&a).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut m = RankerModel::new(RankerConfig::new(Arch::Vgg12, 2), 9);
        m.meta = TrainingMeta {
            iterations: 12,
            metric_id: "niqe".into(),
            dataset_id: "d".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.safetensors");
        m.save(&path).unwrap();
        let back = RankerModel::load(&path).unwrap();
        assert_eq!(back.digest(), m.digest());
        assert_eq!(back.meta, m.meta);
        assert_eq!(back.config, m.config);
    }
}
