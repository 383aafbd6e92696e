use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ranksr_core::Image;
use ranksr_metrics::srocc;
use ranksr_nn::{Adam, Module, Tensor};
use ranksr_rankdata::{ImageStore, PairSampler, PatchRef, RankDatasetManifest, Split};
use serde::{Deserialize, Serialize};

use crate::loss::{rank_batch_step, regression_batch_step};
use crate::{RankerConfig, RankerError, RankerModel, Result, TrainingMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    #[default]
    Rank,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankerTrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// The learning rate is multiplied by `lr_factor` every `lr_step` iterations.
    pub lr_step: u64,
    pub lr_factor: f64,
    pub total_iters: u64,
    pub margin: f64,
    /// Pairs per step.
    pub batch: usize,
    pub seed: u64,
    pub eval_every: u64,
    pub log_every: u64,
    pub mode: TrainMode,
}

impl Default for RankerTrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            lr_step: 100_000,
            lr_factor: 0.5,
            total_iters: 300_000,
            margin: 0.5,
            batch: 32,
            seed: 0,
            eval_every: 1000,
            log_every: 100,
            mode: TrainMode::Rank,
        }
    }
}

impl RankerTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RankerError::Config(m.to_string()));
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if !(self.margin > 0.0) {
            return bad("margin must be positive");
        }
        if self.batch == 0 || self.lr_step == 0 || self.eval_every == 0 || self.log_every == 0 {
            return bad("batch, lr_step, eval_every and log_every must be at least 1");
        }
        Ok(())
    }

    pub fn lr_at(&self, iter: u64) -> f64 {
        self.lr * self.lr_factor.powi((iter / self.lr_step) as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub iter: u64,
    /// Mean training loss since the previous record.
    pub loss: f64,
    pub val_srocc: Option<f64>,
    pub lr: f64,
}

/// Writes one JSON object per line.
pub fn write_log(path: &Path, log: &[LogRecord]) -> Result<()> {
    let io = |e| RankerError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for r in log {
        let line = serde_json::to_string(r).map_err(|e| RankerError::Format(e.to_string()))?;
        writeln!(f, "{line}").map_err(io)?;
    }
    f.flush().map_err(io)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Checkpoint with the highest validation SROCC.
    pub best: RankerModel,
    pub last: RankerModel,
    pub best_srocc: f64,
    pub best_iter: u64,
    pub log: Vec<LogRecord>,
}

/// Validation patches pre-batched for repeated evaluation.
pub(crate) struct ValSet {
    batches: Vec<Tensor<f32>>,
    labels: Vec<f64>,
}

impl ValSet {
    pub(crate) fn new(
        m: &RankDatasetManifest,
        store: &mut ImageStore,
        chunk: usize,
    ) -> Result<Self> {
        let patches = m.patches(Split::Val);
        if patches.len() < 2 {
            return Err(RankerError::TooFewVal(patches.len()));
        }
        let labels = patches.iter().map(|p| p.label as f64).collect();
        let mut batches = Vec::new();
        for part in patches.chunks(chunk) {
            let imgs = part
                .iter()
                .map(|p| store.patch(p))
                .collect::<std::result::Result<Vec<Image>, _>>()?;
            batches.push(Tensor::from_images(&imgs.iter().collect::<Vec<_>>()));
        }
        Ok(Self { batches, labels })
    }

    pub(crate) fn srocc(&self, model: &RankerModel) -> Result<f64> {
        let scores: Vec<f64> = self
            .batches
            .iter()
            .flat_map(|b| model.net.infer(b.clone()).data)
            .map(|v| v as f64)
            .collect();
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(RankerError::NonFinite);
        }
        Ok(srocc(&self.labels, &scores)?)
    }
}

/// SROCC between rank labels and model scores over every validation patch
/// of every level.
pub fn eval_srocc(model: &RankerModel, m: &RankDatasetManifest) -> Result<f64> {
    let mut store = ImageStore::preload(m, Split::Val)?;
    ValSet::new(m, &mut store, 64)?.srocc(model)
}

fn batch_tensor(store: &mut ImageStore, patches: &[&PatchRef]) -> Result<Tensor<f32>> {
    let imgs = patches
        .iter()
        .map(|p| store.patch(p))
        .collect::<std::result::Result<Vec<Image>, _>>()?;
    Ok(Tensor::from_images(&imgs.iter().collect::<Vec<_>>()))
}

/// Trains a fresh ranker on the TRAIN split with periodic validation.
/// With `ckpt_dir`, `best.safetensors` and `last.safetensors` are kept there.
pub fn train_ranker(
    m: &RankDatasetManifest,
    cfg: &RankerTrainConfig,
    arch: RankerConfig,
    ckpt_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let min = arch.min_size();
    if m.patch_spec.size < min {
        return Err(RankerError::Undersized {
            height: m.patch_spec.size,
            width: m.patch_spec.size,
            min,
        });
    }
    if cfg.mode == TrainMode::Regression && m.labels.iter().any(|e| e.score.is_none()) {
        return Err(RankerError::NoScores);
    }
    let sampler = PairSampler::new(m, Split::Train)?;
    let mut store = ImageStore::preload(m, Split::Train)?;
    let mut val_store = ImageStore::preload(m, Split::Val)?;
    let val = ValSet::new(m, &mut val_store, 64)?;
    drop(val_store);

    let mut model = RankerModel::new(arch, cfg.seed);
    model.meta = TrainingMeta {
        iterations: 0,
        metric_id: m.metric_id.clone(),
        dataset_id: m.dataset_id.clone(),
    };
    let mut opt = Adam::new(cfg.lr, cfg.beta1, cfg.beta2, cfg.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_0F_9A1E);

    let mut best: Option<(f64, u64, RankerModel)> = None;
    let mut log = Vec::new();
    let (mut window, mut window_n) = (0.0, 0u64);
    let save = |model: &RankerModel, name: &str| -> Result<Option<PathBuf>> {
        match ckpt_dir {
            Some(dir) => {
                let p = dir.join(name);
                model.save(&p)?;
                Ok(Some(p))
            }
            None => Ok(None),
        }
    };

    for iter in 1..=cfg.total_iters {
        let pairs: Vec<_> = (0..cfg.batch).map(|_| sampler.sample(&mut rng)).collect();
        let a: Vec<&PatchRef> = pairs.iter().map(|p| &p.a).collect();
        let b: Vec<&PatchRef> = pairs.iter().map(|p| &p.b).collect();
        let ta = batch_tensor(&mut store, &a)?;
        let tb = batch_tensor(&mut store, &b)?;
        model.net.zero_grad();
        let loss = match cfg.mode {
            TrainMode::Rank => {
                let gammas: Vec<i8> = pairs.iter().map(|p| p.gamma).collect();
                rank_batch_step(&mut model.net, &ta, &tb, &gammas, cfg.margin, true)
            }
            TrainMode::Regression => {
                let targets: Vec<f64> = a
                    .iter()
                    .chain(&b)
                    .map(|p| p.score.unwrap_or_default())
                    .collect();
                regression_batch_step(&mut model.net, &Tensor::stack(&[&ta, &tb]), &targets, true)
            }
        };
        if !loss.is_finite() {
            let checkpoint = match &best {
                Some((_, _, good)) => save(good, "best.safetensors")?,
                None => None,
            };
            return Err(RankerError::Diverged { iter, checkpoint });
        }
        opt.lr = cfg.lr_at(iter - 1);
        opt.step(&mut model.net);
        window += loss;
        window_n += 1;

        let eval_now = iter % cfg.eval_every == 0 || iter == cfg.total_iters;
        let mut val_srocc = None;
        if eval_now {
            model.meta.iterations = iter;
            let s = val.srocc(&model)?;
            log::info!("ranker iter {iter}: val srocc {s:.4}");
            if best.as_ref().is_none_or(|(b, _, _)| s > *b) {
                best = Some((s, iter, model.clone()));
            }
            val_srocc = Some(s);
        }
        if iter % cfg.log_every == 0 || eval_now {
            log.push(LogRecord {
                iter,
                loss: window / window_n as f64,
                val_srocc,
                lr: opt.lr,
            });
            window = 0.0;
            window_n = 0;
        }
    }
    let (best_srocc, best_iter, best) =
        best.ok_or(RankerError::Config("total_iters must be at least 1".into()))?;
    save(&best, "best.safetensors")?;
    save(&model, "last.safetensors")?;
    Ok(TrainOutcome {
        best,
        last: model,
        best_srocc,
        best_iter,
        log,
    })
}
