use std::path::{Path, PathBuf};

use ranksr_core::PsnrMode;
use ranksr_rankdata::{LabelStrategy, PatchSpec};
use ranksr_ranker::{Arch, RankerTrainConfig};
use ranksr_srgan::{GanTrainConfig, LossWeights, PretrainConfig, TileConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{ExpError, Result};

/// Environment variable that replaces `data.root`.
pub const DATA_ROOT_ENV: &str = "RANKSR_DATA_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub root: PathBuf,
    /// HR training images, relative to `root` unless absolute.
    pub train: PathBuf,
    /// HR validation images.
    pub val: PathBuf,
    /// HR test sets.
    pub test_sets: Vec<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            root: "data".into(),
            train: "train".into(),
            val: "val".into(),
            test_sets: Vec::new(),
        }
    }
}

impl DataConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConfig {
    /// Only `niqe` is computed internally; other metrics are ingested.
    pub id: String,
    /// Pristine NIQE parameters; the canonical model when absent.
    pub pristine_model: Option<PathBuf>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            id: "niqe".into(),
            pristine_model: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankSetKind {
    /// Levels are super-resolution results and HR surrogates, labelled by the metric.
    #[default]
    Sr,
    /// Blur and noise ladders of the training images.
    Distortion,
}

/// One super-resolution level of an SR rank dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelSpec {
    Bicubic,
    /// Outputs of the pretrained MSE generator.
    Srresnet,
    Hr,
    /// Gaussian-blurred HR with the given sigma.
    Blur(f64),
    /// Precomputed images with the training images' file names.
    Dir(PathBuf),
}

impl LevelSpec {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "bicubic" => Self::Bicubic,
            "srresnet" => Self::Srresnet,
            "hr" => Self::Hr,
            _ => match s.split_once(':') {
                Some(("blur", v)) => Self::Blur(
                    v.parse()
                        .map_err(|_| ExpError::Config(format!("bad blur level {s}")))?,
                ),
                Some(("dir", p)) => Self::Dir(p.into()),
                _ => return Err(ExpError::Config(format!("unknown level {s}"))),
            },
        })
    }

    pub fn id(&self) -> String {
        match self {
            Self::Bicubic => "bicubic".into(),
            Self::Srresnet => "srresnet".into(),
            Self::Hr => "hr".into(),
            Self::Blur(s) => format!("blur_{s}"),
            Self::Dir(p) => p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dir".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankDataConfig {
    pub kind: RankSetKind,
    /// SR levels: `bicubic`, `srresnet`, `hr`, `blur:<sigma>` or `dir:<path>`.
    pub levels: Vec<String>,
    pub blur_sigmas: Vec<f64>,
    pub noise_sigmas: Vec<f64>,
    pub patch: PatchSpec,
    pub val_fraction: f64,
    pub strategy: LabelStrategy,
}

impl Default for RankDataConfig {
    fn default() -> Self {
        Self {
            kind: RankSetKind::Sr,
            levels: vec!["bicubic".into(), "srresnet".into(), "blur:1.0".into()],
            blur_sigmas: vec![0.1, 2.0, 4.0],
            noise_sigmas: Vec::new(),
            patch: PatchSpec::default(),
            val_fraction: 0.1,
            strategy: LabelStrategy::MetricRank,
        }
    }
}

impl RankDataConfig {
    pub fn level_specs(&self) -> Result<Vec<LevelSpec>> {
        self.levels.iter().map(|s| LevelSpec::parse(s)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankerSection {
    pub arch: Arch,
    pub base_channels: usize,
    pub train: RankerTrainConfig,
}

impl Default for RankerSection {
    fn default() -> Self {
        Self {
            arch: Arch::Vgg12,
            base_channels: 64,
            train: RankerTrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanSection {
    pub pretrain: PretrainConfig,
    pub train: GanTrainConfig,
    pub weights: LossWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub psnr_mode: PsnrMode,
    pub tile: Option<TileConfig>,
    /// Any of `niqe`, `psnr`, `pi`.
    pub metrics: Vec<String>,
    /// Directory of ingested Ma reports, `<method>/<dataset>.json`, for PI.
    pub ma_scores: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            psnr_mode: PsnrMode::Luma,
            tile: None,
            metrics: vec!["niqe".into(), "psnr".into()],
            ma_scores: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub metric: MetricConfig,
    #[serde(default)]
    pub rankdata: RankDataConfig,
    #[serde(default)]
    pub ranker: RankerSection,
    #[serde(default)]
    pub gan: GanSection,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    /// Parses TOML, then applies the data-root environment override and
    /// validates.
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| ExpError::Config(e.to_string()))?;
        if let Some(root) = std::env::var_os(DATA_ROOT_ENV) {
            cfg.data.root = root.into();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path).map_err(|e| ExpError::io(path, e))?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| ExpError::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.metric.id != "niqe" {
            return Err(ExpError::Config(format!(
                "metric {} cannot be computed internally",
                self.metric.id
            )));
        }
        if self.rankdata.kind == RankSetKind::Sr && self.rankdata.level_specs()?.len() < 2 {
            return Err(ExpError::Config(
                "an SR rank dataset needs at least two levels".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.rankdata.val_fraction) {
            return Err(ExpError::Config("val_fraction must lie in [0, 1)".into()));
        }
        for m in &self.eval.metrics {
            if !["niqe", "psnr", "pi"].contains(&m.as_str()) {
                return Err(ExpError::Config(format!("unknown eval metric {m}")));
            }
        }
        self.ranker.train.validate()?;
        self.gan.pretrain.validate()?;
        self.gan.train.validate()?;
        self.gan.weights.validate()?;
        if self.gan.pretrain.generator != self.gan.train.generator {
            return Err(ExpError::Config(
                "pretrain and GAN generator configs differ".into(),
            ));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_mandatory_and_unknown_keys_fail() {
        assert!(ExperimentConfig::from_toml("").is_err());
        let cfg = ExperimentConfig::from_toml("seed = 3").unwrap();
        assert_eq!(cfg.seed, 3);
        assert!(ExperimentConfig::from_toml("seed = 3\ncolour = 1").is_err());
        assert!(ExperimentConfig::from_toml("seed = 3\n[gan.train]\nbogus = 2").is_err());
        assert!(ExperimentConfig::from_toml(
            "seed = 3\n[rankdata.patch]\nsize = 8\nstride = 8\nextra = 1"
        )
        .is_err());
        let deep =
            ExperimentConfig::from_toml("seed = 3\n[gan.train.generator]\nresidual_blocks = 4\n")
                .unwrap_err();
        assert!(
            deep.to_string().contains("generator configs differ"),
            "{deep}"
        );
        let both = "seed = 3\n[gan.train.generator]\nresidual_blocks = 4\n[gan.pretrain.generator]\nresidual_blocks = 4\n";
        assert_eq!(
            ExperimentConfig::from_toml(both)
                .unwrap()
                .gan
                .train
                .generator
                .residual_blocks,
            4
        );
    }

    #[test]
    fn hash_tracks_every_field_and_round_trips() {
        let a = ExperimentConfig::from_toml("seed = 1").unwrap();
        let b = ExperimentConfig::from_toml("seed = 2").unwrap();
        assert_ne!(a.hash(), b.hash());
        let c = ExperimentConfig::from_toml("seed = 1\n[ranker.train]\nmargin = 0.25").unwrap();
        assert_ne!(a.hash(), c.hash());
        let back = ExperimentConfig::from_toml(&a.to_toml().unwrap()).unwrap();
        assert_eq!(back.hash(), a.hash());
    }

    #[test]
    fn level_specs_parse() {
        assert_eq!(LevelSpec::parse("blur:1.5").unwrap(), LevelSpec::Blur(1.5));
        assert_eq!(LevelSpec::parse("dir:/x/esrgan").unwrap().id(), "esrgan");
        assert!(LevelSpec::parse("sharp").is_err());
        assert!(ExperimentConfig::from_toml("seed = 1\n[rankdata]\nlevels = [\"hr\"]").is_err());
    }
}
