use std::path::{Path, PathBuf};

use ranksr_metrics::NiqeModel;
use ranksr_rankdata::{ImageStore, RankDatasetManifest, Split};
use ranksr_ranker::{
    separation_from_scores, train_ranker, write_log, RankerConfig, RankerModel, SeparationReport,
};
use ranksr_srgan::{load_generator, pretrain_srresnet, read_train_log, GanTrainer, PairedSet};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::eval::{evaluate_suite, EvalOptions, EvalTable, Method};
use crate::plots::{plot_ranker_log, plot_separation, plot_training_curves};
use crate::rankset::build_rankset;
use crate::{ExpError, Result};

pub const STAGES: [&str; 5] = ["pretrain", "rankdata", "ranker", "gan", "eval"];
const MARKER: &str = "stage.json";

/// Completion record of one stage, with the content hash of every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMarker {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    pub artifacts: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub dir: PathBuf,
    pub config_hash: String,
    pub executed: Vec<String>,
    pub skipped: Vec<String>,
    pub table: EvalTable,
}

/// `<root>/<name>-<config hash>`; the seed is part of the hashed config.
pub fn artifact_dir(cfg: &ExperimentConfig, root: &Path) -> PathBuf {
    let name = if cfg.name.is_empty() {
        "run"
    } else {
        cfg.name.as_str()
    };
    root.join(format!("{name}-{}", cfg.hash()))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| ExpError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn files_under(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| ExpError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| ExpError::io(dir, e)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            files_under(&p, out)?;
        } else if p.file_name().is_some_and(|n| n != MARKER) {
            out.push(p);
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| ExpError::Format(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| ExpError::io(path, e))
}

fn seal(dir: &Path, stage: &str, cfg: &ExperimentConfig) -> Result<()> {
    let mut files = Vec::new();
    files_under(dir, &mut files)?;
    let artifacts = files
        .iter()
        .map(|p| {
            Ok((
                p.strip_prefix(dir)
                    .unwrap_or(p)
                    .to_string_lossy()
                    .into_owned(),
                file_sha256(p)?,
            ))
        })
        .collect::<Result<_>>()?;
    let marker = StageMarker {
        stage: stage.into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        artifacts,
    };
    write_json(&dir.join(MARKER), &marker)
}

/// True when `dir` holds a marker for this config whose artifacts are all
/// present and unchanged.
pub fn stage_complete(dir: &Path, cfg: &ExperimentConfig) -> bool {
    let Ok(text) = std::fs::read_to_string(dir.join(MARKER)) else {
        return false;
    };
    let Ok(m) = serde_json::from_str::<StageMarker>(&text) else {
        return false;
    };
    m.config_hash == cfg.hash()
        && m.seed == cfg.seed
        && m.artifacts
            .iter()
            .all(|(rel, h)| file_sha256(&dir.join(rel)).is_ok_and(|x| &x == h))
}

/// The config with the experiment seed applied to every stage.
pub fn seeded(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.ranker.train.seed = cfg.seed;
    c.gan.pretrain.seed = cfg.seed;
    c.gan.train.seed = cfg.seed;
    c
}

pub fn niqe_model(cfg: &ExperimentConfig) -> Result<NiqeModel> {
    Ok(match &cfg.metric.pristine_model {
        Some(p) => NiqeModel::load(&cfg.data.resolve(p))?,
        None => NiqeModel::canonical(),
    })
}

/// Ranker scores of every patch of `split`, pooled per level, summarized
/// as a separation report.
pub fn manifest_separation(
    model: &RankerModel,
    m: &RankDatasetManifest,
    split: Split,
) -> Result<SeparationReport> {
    let mut store = ImageStore::preload(m, split)?;
    let patches = m.patches(split);
    let mut raw: Vec<(String, Vec<f64>)> = m
        .levels
        .iter()
        .map(|l| (l.level_id.clone(), Vec::new()))
        .collect();
    for p in &patches {
        let s = model.score(&store.patch(p)?)?;
        if let Some((_, v)) = raw.iter_mut().find(|(id, _)| *id == p.level_id) {
            v.push(s);
        }
    }
    raw.retain(|(_, v)| !v.is_empty());
    Ok(separation_from_scores(raw)?)
}

fn stage_err(stage: &str) -> impl Fn(ExpError) -> ExpError + '_ {
    move |e| ExpError::Stage {
        stage: stage.into(),
        reason: e.to_string(),
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    hash: String,
    dir: &'a Path,
    niqe: NiqeModel,
}

impl Ctx<'_> {
    fn stage_dir(&self, s: &str) -> PathBuf {
        self.dir.join(s)
    }

    fn train_set(&self) -> Result<PairedSet> {
        Ok(PairedSet::load_dir(
            &self.cfg.data.resolve(&self.cfg.data.train),
        )?)
    }

    fn val_set(&self) -> Result<PairedSet> {
        Ok(PairedSet::load_dir(
            &self.cfg.data.resolve(&self.cfg.data.val),
        )?)
    }

    fn pretrain(&self, out: &Path) -> Result<()> {
        let data = self.train_set()?;
        let val = self.val_set()?;
        pretrain_srresnet(&self.cfg.gan.pretrain, &data, Some(&val), Some(out))?;
        Ok(())
    }

    fn pretrained(&self) -> Result<ranksr_srgan::Generator<f32>> {
        Ok(load_generator(&self.stage_dir("pretrain").join("generator.safetensors"))?.0)
    }

    fn rankdata(&self, out: &Path) -> Result<()> {
        let g = self.pretrained()?;
        let hr = self.cfg.data.resolve(&self.cfg.data.train);
        let id = format!("{}-{}", self.cfg.name, self.hash);
        build_rankset(
            &self.cfg.rankdata,
            &hr,
            Some(&g),
            &self.niqe,
            &id,
            self.cfg.seed,
            out,
        )?;
        Ok(())
    }

    fn manifest(&self) -> Result<RankDatasetManifest> {
        Ok(RankDatasetManifest::load(
            &self.stage_dir("rankdata").join("manifest.json"),
        )?)
    }

    fn ranker(&self, out: &Path) -> Result<()> {
        let m = self.manifest()?;
        let arch = RankerConfig::new(self.cfg.ranker.arch, self.cfg.ranker.base_channels);
        let outcome = train_ranker(&m, &self.cfg.ranker.train, arch, Some(out))?;
        write_log(&out.join("train_log.jsonl"), &outcome.log)?;
        let sep = manifest_separation(&outcome.best, &m, Split::Val)?;
        write_json(&out.join("separation.json"), &sep)
    }

    fn best_ranker(&self) -> Result<RankerModel> {
        Ok(RankerModel::load(
            &self.stage_dir("ranker").join("best.safetensors"),
        )?)
    }

    fn gan(&self, out: &Path) -> Result<()> {
        let rankers = [self.best_ranker()?];
        let data = self.train_set()?;
        let val = self.val_set()?;
        let state = out.join("state.safetensors");
        let mut t = if state.exists() {
            log::info!("resuming GAN training from {}", state.display());
            GanTrainer::resume(&state, &rankers)?
        } else {
            GanTrainer::new(
                self.cfg.gan.train.clone(),
                &rankers,
                self.cfg.gan.weights.clone(),
                Some(self.pretrained()?),
            )?
        };
        t.run(&data, Some(&val), self.cfg.gan.train.total_iters, Some(out))?;
        t.save_outputs(out)?;
        Ok(())
    }

    fn eval(&self, out: &Path) -> Result<EvalTable> {
        let methods = vec![
            Method::Bicubic,
            Method::Checkpoint {
                name: "srresnet".into(),
                path: self.stage_dir("pretrain").join("generator.safetensors"),
            },
            Method::Checkpoint {
                name: "ranksrgan".into(),
                path: self.stage_dir("gan").join("generator.safetensors"),
            },
        ];
        let mut sets: Vec<(String, PathBuf)> = self
            .cfg
            .data
            .test_sets
            .iter()
            .map(|p| {
                let dir = self.cfg.data.resolve(p);
                let id = dir
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "test".into());
                (id, dir)
            })
            .collect();
        if sets.is_empty() {
            sets.push(("val".into(), self.cfg.data.resolve(&self.cfg.data.val)));
        }
        let opts = EvalOptions {
            metrics: self.cfg.eval.metrics.clone(),
            psnr_mode: self.cfg.eval.psnr_mode,
            tile: self.cfg.eval.tile,
            niqe_model: self.niqe.clone(),
            ma_scores: self
                .cfg
                .eval
                .ma_scores
                .as_ref()
                .map(|p| self.cfg.data.resolve(p)),
        };
        let mut table = evaluate_suite(&methods, &sets, &opts, &out.join("suite"))?;
        table.config_hash = Some(self.hash.clone());
        table.save(&out.join("table.json"))?;
        std::fs::write(out.join("table.txt"), table.render()).map_err(|e| ExpError::io(out, e))?;

        let curves = vec![
            (
                "srresnet".to_string(),
                read_train_log(&self.stage_dir("pretrain").join("train_log.jsonl"))?,
            ),
            (
                "ranksrgan".to_string(),
                read_train_log(&self.stage_dir("gan").join("train_log.jsonl"))?,
            ),
        ];
        plot_training_curves(&curves, &out.join("plots"))?;
        let rlog = std::fs::read_to_string(self.stage_dir("ranker").join("train_log.jsonl"))
            .map_err(|e| ExpError::io(self.stage_dir("ranker"), e))?;
        let rlog = rlog
            .lines()
            .map(|l| serde_json::from_str(l).map_err(|e| ExpError::Format(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        plot_ranker_log(&rlog, &out.join("plots"))?;
        let sep: SeparationReport = serde_json::from_str(
            &std::fs::read_to_string(self.stage_dir("ranker").join("separation.json"))
                .map_err(|e| ExpError::io(self.stage_dir("ranker"), e))?,
        )
        .map_err(|e| ExpError::Format(e.to_string()))?;
        plot_separation(&sep, &out.join("plots").join("separation.png"))?;
        Ok(table)
    }
}

/// Runs pretrain → rank data → ranker → GAN → evaluation under
/// [`artifact_dir`]. Completed stages with intact artifacts are skipped, so
/// a rerun of a finished pipeline does nothing and a failed one resumes at
/// the failed stage.
pub fn run_pipeline(config: &ExperimentConfig, root: &Path) -> Result<PipelineOutcome> {
    config.validate()?;
    let cfg = seeded(config);
    let dir = artifact_dir(config, root);
    std::fs::create_dir_all(&dir).map_err(|e| ExpError::io(&dir, e))?;
    std::fs::write(dir.join("config.toml"), config.to_toml()?)
        .map_err(|e| ExpError::io(&dir, e))?;
    let ctx = Ctx {
        cfg: &cfg,
        hash: config.hash(),
        dir: &dir,
        niqe: niqe_model(&cfg)?,
    };
    let (mut executed, mut skipped) = (Vec::new(), Vec::new());
    for stage in STAGES {
        let out = ctx.stage_dir(stage);
        if stage_complete(&out, config) {
            log::info!("stage {stage}: up to date");
            skipped.push(stage.to_string());
            continue;
        }
        log::info!("stage {stage}: running");
        std::fs::create_dir_all(&out).map_err(|e| ExpError::io(&out, e))?;
        let _ = std::fs::remove_file(out.join(MARKER));
        match stage {
            "pretrain" => ctx.pretrain(&out),
            "rankdata" => ctx.rankdata(&out),
            "ranker" => ctx.ranker(&out),
            "gan" => ctx.gan(&out),
            _ => ctx.eval(&out).map(|_| ()),
        }
        .map_err(stage_err(stage))?;
        seal(&out, stage, config)?;
        executed.push(stage.to_string());
    }
    let table = EvalTable::load(&ctx.stage_dir("eval").join("table.json"))?;
    Ok(PipelineOutcome {
        dir,
        config_hash: config.hash(),
        executed,
        skipped,
        table,
    })
}
