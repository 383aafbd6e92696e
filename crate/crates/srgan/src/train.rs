use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ranksr_metrics::NiqeModel;
use ranksr_nn::{digest, Adam, Checkpoint, Module, Sequential, Tensor};
use ranksr_ranker::RankerModel;
use serde::{Deserialize, Serialize};

use crate::ckpt::{
    expect_kind, from_json, generator_from, header, insert_adam, iteration, load_adam, to_json,
};
use crate::data::validate;
use crate::losses::{
    adversarial_g_grad, discriminator_backward, mse_loss, perceptual_loss_grad, rank_content_grad,
    total_generator_loss,
};
use crate::{
    save_discriminator, save_generator, Discriminator, DiscriminatorConfig, ExtractorConfig,
    FeatureExtractor, Generator, GeneratorConfig, LossParts, LossWeights, Monotone, PairedSet,
    Result, SrError, SCALE,
};

/// Staircase schedule: `base · gamma^k` where `k` milestones are `<= iter`.
pub fn multistep_lr(base: f64, milestones: &[u64], gamma: f64, iter: u64) -> f64 {
    base * gamma.powi(milestones.iter().filter(|&&m| m <= iter).count() as i32)
}

fn check_schedule(milestones: &[u64], lr: f64, patch: (usize, usize), batch: usize) -> Result<()> {
    if milestones.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SrError::Config(
            "milestones must be strictly increasing".into(),
        ));
    }
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(SrError::Config("lr must be finite and non-negative".into()));
    }
    if patch.0 != SCALE * patch.1 {
        return Err(SrError::Config(format!(
            "hr_patch {} must be {SCALE} × lr_patch {}",
            patch.0, patch.1
        )));
    }
    if batch == 0 {
        return Err(SrError::Config("batch must be at least 1".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanTrainConfig {
    pub hr_patch: usize,
    pub lr_patch: usize,
    pub batch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub milestones: Vec<u64>,
    pub lr_gamma: f64,
    pub total_iters: u64,
    pub monotone: Monotone,
    pub seed: u64,
    /// Validation cadence; 0 disables it.
    pub val_every: u64,
    pub log_every: u64,
    /// Full-state checkpoint cadence; 0 keeps only the final state.
    pub checkpoint_every: u64,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub extractor: ExtractorConfig,
    pub pretrain_checkpoint: Option<PathBuf>,
}

impl Default for GanTrainConfig {
    fn default() -> Self {
        Self {
            hr_patch: 296,
            lr_patch: 74,
            batch: 8,
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            milestones: vec![50_000, 100_000, 200_000, 300_000],
            lr_gamma: 0.5,
            total_iters: 600_000,
            monotone: Monotone::Sigmoid,
            seed: 0,
            val_every: 2000,
            log_every: 100,
            checkpoint_every: 0,
            generator: GeneratorConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            extractor: ExtractorConfig::default(),
            pretrain_checkpoint: None,
        }
    }
}

impl GanTrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_schedule(
            &self.milestones,
            self.lr,
            (self.hr_patch, self.lr_patch),
            self.batch,
        )?;
        if self.log_every == 0 {
            return Err(SrError::Config("log_every must be at least 1".into()));
        }
        let min = self.discriminator.min_size();
        if self.hr_patch < min {
            return Err(SrError::Undersized {
                height: self.hr_patch,
                width: self.hr_patch,
                min,
            });
        }
        Ok(())
    }

    pub fn lr_at(&self, iter: u64) -> f64 {
        multistep_lr(self.lr, &self.milestones, self.lr_gamma, iter)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainConfig {
    pub hr_patch: usize,
    pub lr_patch: usize,
    pub batch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub milestones: Vec<u64>,
    pub lr_gamma: f64,
    pub total_iters: u64,
    pub seed: u64,
    pub val_every: u64,
    pub log_every: u64,
    pub generator: GeneratorConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            hr_patch: 296,
            lr_patch: 74,
            batch: 16,
            lr: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            milestones: vec![200_000, 400_000, 600_000, 800_000],
            lr_gamma: 0.5,
            total_iters: 1_000_000,
            seed: 0,
            val_every: 2000,
            log_every: 100,
            generator: GeneratorConfig::default(),
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_schedule(
            &self.milestones,
            self.lr,
            (self.hr_patch, self.lr_patch),
            self.batch,
        )?;
        if self.log_every == 0 {
            return Err(SrError::Config("log_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// One line of a training log; loss terms are means since the previous line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub iter: u64,
    #[serde(rename = "L_P")]
    pub l_p: f64,
    #[serde(rename = "L_G")]
    pub l_g: f64,
    #[serde(rename = "L_R")]
    pub l_r: f64,
    #[serde(rename = "L_M")]
    pub l_m: f64,
    #[serde(rename = "L_D")]
    pub l_d: f64,
    pub lr: f64,
    pub val_psnr: Option<f64>,
    pub val_niqe: Option<f64>,
}

pub fn write_train_log(path: &Path, log: &[TrainLogRecord]) -> Result<()> {
    let io = |e| SrError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for r in log {
        writeln!(f, "{}", to_json(r)?).map_err(io)?;
    }
    f.flush().map_err(io)
}

pub fn read_train_log(path: &Path) -> Result<Vec<TrainLogRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| SrError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(from_json)
        .collect()
}

#[derive(Default)]
struct Window {
    parts: LossParts,
    d: f64,
    n: u64,
}

impl Window {
    fn add(&mut self, p: &LossParts, d: f64) {
        self.parts.perceptual += p.perceptual;
        self.parts.adversarial += p.adversarial;
        self.parts.rank += p.rank;
        self.parts.mse += p.mse;
        self.d += d;
        self.n += 1;
    }

    fn take(&mut self, iter: u64, lr: f64, val: Option<(f64, f64)>) -> TrainLogRecord {
        let n = self.n.max(1) as f64;
        let r = TrainLogRecord {
            iter,
            l_p: self.parts.perceptual / n,
            l_g: self.parts.adversarial / n,
            l_r: self.parts.rank / n,
            l_m: self.parts.mse / n,
            l_d: self.d / n,
            lr,
            val_psnr: val.map(|v| v.0),
            val_niqe: val.map(|v| v.1),
        };
        *self = Self::default();
        r
    }
}

/// Generator and discriminator with their optimizers, data RNG and the
/// frozen networks that steer the generator.
pub struct GanTrainer {
    pub cfg: GanTrainConfig,
    pub weights: LossWeights,
    pub generator: Generator<f32>,
    pub discriminator: Discriminator<f32>,
    extractor: FeatureExtractor<f32>,
    rankers: Vec<(Sequential<f32>, f64)>,
    frozen: Vec<String>,
    opt_g: Adam<f32>,
    opt_d: Adam<f32>,
    rng: ChaCha8Rng,
    pub iteration: u64,
    pub log: Vec<TrainLogRecord>,
    window: Window,
}

impl GanTrainer {
    /// A fresh run. `warm_start` replaces the seeded generator; without it
    /// `cfg.pretrain_checkpoint` is loaded when set.
    pub fn new(
        cfg: GanTrainConfig,
        rankers: &[RankerModel],
        weights: LossWeights,
        warm_start: Option<Generator<f32>>,
    ) -> Result<Self> {
        cfg.validate()?;
        weights.validate()?;
        let generator = match (warm_start, &cfg.pretrain_checkpoint) {
            (Some(g), _) => g,
            (None, Some(p)) => crate::load_generator(p)?.0,
            (None, None) => Generator::new(cfg.generator, cfg.seed),
        };
        if generator.config != cfg.generator {
            return Err(SrError::Config(
                "warm-start generator does not match the generator config".into(),
            ));
        }
        let discriminator = Discriminator::new(cfg.discriminator, cfg.seed ^ 0xD15C);
        let extractor = FeatureExtractor::new(cfg.extractor.clone())?;
        let rw = weights.resolve_ranker_weights(rankers.len())?;
        let mut nets = Vec::new();
        for (r, w) in rankers.iter().zip(rw) {
            if cfg.hr_patch < r.config.min_size() {
                return Err(SrError::Undersized {
                    height: cfg.hr_patch,
                    width: cfg.hr_patch,
                    min: r.config.min_size(),
                });
            }
            let mut net = r.net.clone();
            net.freeze();
            nets.push((net, w));
        }
        let mut frozen = vec![extractor.digest()];
        frozen.extend(rankers.iter().map(|r| r.digest()));
        let opt = || Adam::new(cfg.lr, cfg.beta1, cfg.beta2, 0.0);
        Ok(Self {
            opt_g: opt(),
            opt_d: opt(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            weights,
            generator,
            discriminator,
            extractor,
            rankers: nets,
            frozen,
            iteration: 0,
            log: Vec::new(),
            window: Window::default(),
        })
    }

    /// Hashes of the extractor and every ranker as currently held.
    pub fn frozen_digests(&self) -> Vec<String> {
        let mut d = vec![self.extractor.digest()];
        d.extend(self.rankers.iter().map(|(n, _)| digest(n)));
        d
    }

    fn check_frozen(&self) -> Result<()> {
        let now = self.frozen_digests();
        if now[0] != self.frozen[0] {
            return Err(SrError::FrozenModified("feature extractor"));
        }
        if now[1..] != self.frozen[1..] {
            return Err(SrError::FrozenModified("ranker"));
        }
        Ok(())
    }

    /// Generator update followed by a discriminator update on one batch.
    pub fn step(&mut self, data: &PairedSet) -> Result<(LossParts, f64)> {
        let iter = self.iteration + 1;
        let (lr_t, hr_t) = data.sample_batch(self.cfg.lr_patch, self.cfg.batch, &mut self.rng)?;
        let w = &self.weights;
        let sr = self.generator.forward(lr_t, true);
        let mut parts = LossParts::default();
        let mut dsr = Tensor::zeros(sr.n, sr.c, sr.h, sr.w);
        let mut add = |g: Tensor<f32>, k: f64| {
            dsr.add_assign(&g.scale(k as f32));
        };
        if w.perceptual > 0.0 {
            let (l, g) = perceptual_loss_grad(&mut self.extractor, &sr, &hr_t);
            parts.perceptual = l;
            add(g, w.perceptual);
        }
        if w.adversarial > 0.0 {
            let (l, g) = adversarial_g_grad(&mut self.discriminator, &sr, true);
            parts.adversarial = l;
            add(g, w.adversarial);
        }
        if w.rank > 0.0 && !self.rankers.is_empty() {
            let mut refs: Vec<(&mut Sequential<f32>, f64)> =
                self.rankers.iter_mut().map(|(n, k)| (n, *k)).collect();
            let (l, g) = rank_content_grad(&mut refs, &sr, self.cfg.monotone);
            parts.rank = l;
            add(g, w.rank);
        }
        if w.mse > 0.0 {
            let (l, g) = mse_loss(&sr, &hr_t);
            parts.mse = l;
            add(g, w.mse);
        }
        let lr = self.cfg.lr_at(iter - 1);
        self.generator.zero_grad();
        self.generator.backward(dsr);
        self.opt_g.lr = lr;
        self.opt_g.step(&mut self.generator);

        self.discriminator.zero_grad();
        let l_d = discriminator_backward(&mut self.discriminator, &hr_t, &sr);
        self.opt_d.lr = lr;
        self.opt_d.step(&mut self.discriminator);

        let total = total_generator_loss(w, &parts);
        if !total.is_finite() || !l_d.is_finite() {
            return Err(SrError::NonFinite {
                what: "loss",
                iter,
                l_p: parts.perceptual,
                l_g: parts.adversarial,
                l_r: parts.rank,
                l_m: parts.mse,
                l_d,
            });
        }
        self.iteration = iter;
        self.window.add(&parts, l_d);
        Ok((parts, l_d))
    }

    /// Trains until `until` (at most `cfg.total_iters`), logging and
    /// validating on the configured cadence. With `out_dir`, periodic state
    /// checkpoints go to `out_dir/state.safetensors`.
    pub fn run(
        &mut self,
        data: &PairedSet,
        val: Option<&PairedSet>,
        until: u64,
        out_dir: Option<&Path>,
    ) -> Result<()> {
        let niqe = NiqeModel::canonical();
        let end = until.min(self.cfg.total_iters);
        while self.iteration < end {
            self.step(data)?;
            let iter = self.iteration;
            let val_now = self.cfg.val_every > 0 && iter.is_multiple_of(self.cfg.val_every)
                || iter == self.cfg.total_iters;
            let v = match val {
                Some(set) if val_now => {
                    let v = validate(&self.generator, set, &niqe)?;
                    log::info!("gan iter {iter}: val psnr {:.3} niqe {:.3}", v.0, v.1);
                    Some(v)
                }
                _ => None,
            };
            if iter.is_multiple_of(self.cfg.log_every)
                || iter == self.cfg.total_iters
                || v.is_some()
            {
                let record = self.window.take(iter, self.opt_g.lr, v);
                self.log.push(record);
            }
            if let Some(dir) = out_dir {
                if self.cfg.checkpoint_every > 0 && iter.is_multiple_of(self.cfg.checkpoint_every) {
                    self.save_state(&dir.join("state.safetensors"))?;
                }
            }
        }
        self.check_frozen()
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ck = header("gan_state", self.iteration);
        ck.set_meta("config", to_json(&self.cfg)?);
        ck.set_meta("weights", to_json(&self.weights)?);
        ck.set_meta("g.config", to_json(&self.generator.config)?);
        ck.set_meta("rng_state", to_json(&self.rng)?);
        ck.set_meta("log", to_json(&self.log)?);
        ck.set_meta(
            "window",
            to_json(&(self.window.parts, self.window.d, self.window.n))?,
        );
        ck.set_meta("frozen", to_json(&self.frozen)?);
        ck.insert_module("g.net", &self.generator);
        ck.insert_module("d.net", &self.discriminator);
        insert_adam(&mut ck, "opt_g", &self.opt_g);
        insert_adam(&mut ck, "opt_d", &self.opt_d);
        Ok(ck)
    }

    pub fn save_state(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| SrError::Io {
                path: dir.to_path_buf(),
                source: e,
            })?;
        }
        Ok(self.to_checkpoint()?.save(path)?)
    }

    /// Restores a run saved by [`GanTrainer::save_state`]; the same rankers
    /// must be supplied.
    pub fn resume(path: &Path, rankers: &[RankerModel]) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        expect_kind(&ck, "gan_state")?;
        let cfg: GanTrainConfig = from_json(ck.meta("config")?)?;
        let weights: LossWeights = from_json(ck.meta("weights")?)?;
        let generator = generator_from(&ck, "g.")?;
        let mut t = Self::new(cfg, rankers, weights, Some(generator))?;
        let frozen: Vec<String> = from_json(ck.meta("frozen")?)?;
        if frozen != t.frozen {
            return Err(SrError::Format(
                "rankers or extractor differ from the saved run".into(),
            ));
        }
        ck.load_module("d.net", &mut t.discriminator)?;
        load_adam(&ck, "opt_g", &mut t.opt_g)?;
        load_adam(&ck, "opt_d", &mut t.opt_d)?;
        t.rng = from_json(ck.meta("rng_state")?)?;
        t.log = from_json(ck.meta("log")?)?;
        let (parts, d, n): (LossParts, f64, u64) = from_json(ck.meta("window")?)?;
        t.window = Window { parts, d, n };
        t.iteration = iteration(&ck)?;
        Ok(t)
    }

    /// Writes `generator.safetensors`, `discriminator.safetensors`,
    /// `state.safetensors` and `train_log.jsonl`.
    pub fn save_outputs(&self, dir: &Path) -> Result<()> {
        self.save_state(&dir.join("state.safetensors"))?;
        save_generator(
            &self.generator,
            self.iteration,
            &dir.join("generator.safetensors"),
        )?;
        save_discriminator(
            &self.discriminator,
            self.iteration,
            &dir.join("discriminator.safetensors"),
        )?;
        write_train_log(&dir.join("train_log.jsonl"), &self.log)
    }
}

/// Full RankSRGAN run: warm start, alternating updates up to
/// `cfg.total_iters`, outputs written to `out_dir` when given.
pub fn train_ranksrgan(
    cfg: &GanTrainConfig,
    rankers: &[RankerModel],
    weights: &LossWeights,
    data: &PairedSet,
    val: Option<&PairedSet>,
    warm_start: Option<Generator<f32>>,
    out_dir: Option<&Path>,
) -> Result<GanTrainer> {
    let mut t = GanTrainer::new(cfg.clone(), rankers, weights.clone(), warm_start)?;
    t.run(data, val, cfg.total_iters, out_dir)?;
    if let Some(dir) = out_dir {
        t.save_outputs(dir)?;
    }
    Ok(t)
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub generator: Generator<f32>,
    pub log: Vec<TrainLogRecord>,
}

/// MSE-only generator training.
pub fn pretrain_srresnet(
    cfg: &PretrainConfig,
    data: &PairedSet,
    val: Option<&PairedSet>,
    out_dir: Option<&Path>,
) -> Result<PretrainOutcome> {
    cfg.validate()?;
    let niqe = NiqeModel::canonical();
    let mut g = Generator::new(cfg.generator, cfg.seed);
    let mut opt = Adam::new(cfg.lr, cfg.beta1, cfg.beta2, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut window = Window::default();
    let mut log = Vec::new();
    for iter in 1..=cfg.total_iters {
        let (lr_t, hr_t) = data.sample_batch(cfg.lr_patch, cfg.batch, &mut rng)?;
        let sr = g.forward(lr_t, true);
        let (l, grad) = mse_loss(&sr, &hr_t);
        if !l.is_finite() {
            return Err(SrError::NonFinite {
                what: "mse",
                iter,
                l_p: 0.0,
                l_g: 0.0,
                l_r: 0.0,
                l_m: l,
                l_d: 0.0,
            });
        }
        g.zero_grad();
        g.backward(grad);
        opt.lr = multistep_lr(cfg.lr, &cfg.milestones, cfg.lr_gamma, iter - 1);
        opt.step(&mut g);
        window.add(
            &LossParts {
                mse: l,
                ..Default::default()
            },
            0.0,
        );
        let val_now = cfg.val_every > 0 && iter % cfg.val_every == 0 || iter == cfg.total_iters;
        let v = match val {
            Some(set) if val_now => Some(validate(&g, set, &niqe)?),
            _ => None,
        };
        if iter % cfg.log_every == 0 || iter == cfg.total_iters || v.is_some() {
            log.push(window.take(iter, opt.lr, v));
        }
    }
    if let Some(dir) = out_dir {
        save_generator(&g, cfg.total_iters, &dir.join("generator.safetensors"))?;
        write_train_log(&dir.join("train_log.jsonl"), &log)?;
    }
    Ok(PretrainOutcome { generator: g, log })
}
