use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ranksr_core::{save_image, synthetic::DeadLeaves};
use ranksr_experiments::config::ExperimentConfig;
use ranksr_experiments::pipeline::{manifest_separation, niqe_model, run_pipeline, seeded};
use ranksr_experiments::plots::{
    histogram_plot, plot_ranker_log, plot_separation, plot_training_curves,
};
use ranksr_experiments::rankset::build_rankset;
use ranksr_experiments::{evaluate_suite, upper_bound, EvalOptions, ExpError, Method, Result};
use ranksr_metrics::{
    batch_score, ingest_scores, MetricSpec, NiqeMetric, Polarity, Provenance, ScoreReport,
};
use ranksr_nn::Module;
use ranksr_rankdata::{RankDatasetManifest, Split};
use ranksr_ranker::{
    class_separation_report, eval_srocc, train_ranker, write_log, Arch, LogRecord, RankerConfig,
    RankerModel, SeparationReport,
};
use ranksr_srgan::{
    infer_dir, load_generator, pretrain_srresnet, read_train_log, Discriminator, GanTrainer,
    Generator, Monotone, PairedSet, TileConfig,
};

#[derive(Parser)]
#[command(
    name = "ranksr",
    version,
    about = "Rank-guided super-resolution toolkit"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct ConfigArg {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Replaces the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArg {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(seeded(&cfg))
    }
}

#[derive(Subcommand)]
enum PlotCmd {
    /// Validation NIQE/PSNR curves from GAN or pretraining logs (`name=log.jsonl`).
    Curves {
        #[arg(long = "log", required = true)]
        logs: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Loss and SROCC curves of a ranker log.
    Ranker {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Histogram of a separation report, or of ScoreReports given as `name=report.json`.
    Hist {
        #[arg(long)]
        separation: Option<PathBuf>,
        #[arg(long = "report")]
        reports: Vec<String>,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a rank dataset from HR images.
    BuildRankdata {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        hr: PathBuf,
        /// Generator for the `srresnet` level.
        #[arg(long)]
        srresnet: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a ranker on a rank dataset manifest.
    TrainRanker {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validation SROCC and class separation of a trained ranker.
    EvalRanker {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Class directories as `name=dir`, scored whole-image.
        #[arg(long = "class")]
        classes: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ranker scores of every PNG in a directory as a ScoreReport.
    RankScore {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// MSE pretraining of the generator.
    Pretrain {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// GAN training with optional rank-content guidance.
    TrainSr {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: Option<PathBuf>,
        /// Ranker checkpoints, each optionally suffixed `:weight`.
        #[arg(long, value_delimiter = ',')]
        rankers: Vec<String>,
        /// `sigmoid`, `exp` or `identity`.
        #[arg(long)]
        monotone: Option<String>,
        /// Warm-start generator (overrides the config's pretrain checkpoint).
        #[arg(long)]
        pretrained: Option<PathBuf>,
        /// Continue from `<out>/state.safetensors` when present.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Super-resolve every PNG of a directory.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// LR tile side; whole images when absent.
        #[arg(long)]
        tile: Option<usize>,
        /// HR overlap between tiles, a multiple of 4.
        #[arg(long, default_value_t = 8)]
        overlap: usize,
    },
    /// Score a directory with NIQE, or ingest external scores.
    Score {
        #[arg(long)]
        dir: Option<PathBuf>,
        /// `image<TAB>score` file of an external metric.
        #[arg(long)]
        ingest: Option<PathBuf>,
        /// `niqe`, or for ingestion `ma`, `pi`, `rmse` or `niqe`.
        #[arg(long, default_value = "niqe")]
        metric: String,
        #[arg(long)]
        pristine: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metric-rank and model-classification upper bounds of two reports.
    UpperBound { a: PathBuf, b: PathBuf },
    /// Evaluation table over methods and test sets.
    EvalSuite {
        #[command(flatten)]
        config: ConfigArg,
        /// `bicubic`, `name=generator.safetensors` or a checkpoint path.
        #[arg(long = "method", required = true)]
        methods: Vec<String>,
        /// `name=dir` or a directory.
        #[arg(long = "set", required = true)]
        sets: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plots with CSV sidecars.
    Plot {
        #[command(subcommand)]
        what: PlotCmd,
    },
    /// The staged pipeline; completed stages are skipped.
    Run {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Parameter counts of the configured networks.
    Params {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Dead-leaves images for smoke tests.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        count: usize,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, default_value_t = 16.0)]
        max_radius: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn named(s: &str) -> (String, PathBuf) {
    match s.split_once('=') {
        Some((n, p)) => (n.into(), p.into()),
        None => {
            let p = PathBuf::from(s);
            let n = p
                .file_stem()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| s.into());
            (n, p)
        }
    }
}

fn parse_ranker(s: &str) -> Result<(PathBuf, Option<f64>)> {
    if let Some((p, w)) = s.rsplit_once(':') {
        if let Ok(w) = w.parse::<f64>() {
            return Ok((p.into(), Some(w)));
        }
    }
    Ok((s.into(), None))
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| ExpError::Io {
            path: dir.into(),
            source: e,
        })?;
    }
    let text = serde_json::to_string_pretty(v).map_err(|e| ExpError::Format(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| ExpError::Io {
        path: path.into(),
        source: e,
    })
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| ExpError::Io {
        path: path.into(),
        source: e,
    })?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l)
                .map_err(|e| ExpError::Format(format!("{}: {e}", path.display())))
        })
        .collect()
}

fn print_separation(sep: &SeparationReport) {
    for c in &sep.classes {
        println!(
            "  {:<16} n={:<6} mean={:.4} std={:.4} raw_mean={:.4}",
            c.class_id, c.count, c.mean, c.std, c.raw_mean
        );
    }
    println!(
        "  std of class means {:.4}; order best→worst {:?}",
        sep.std_of_means,
        sep.order()
    );
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::BuildRankdata {
            config,
            hr,
            srresnet,
            out,
        } => {
            let cfg = config.load()?;
            let g = srresnet
                .map(|p| load_generator(&p).map(|(g, _)| g))
                .transpose()?;
            let id = format!("{}-{}", cfg.name, cfg.hash());
            let m = build_rankset(
                &cfg.rankdata,
                &hr,
                g.as_ref(),
                &niqe_model(&cfg)?,
                &id,
                cfg.seed,
                &out,
            )?;
            println!(
                "{} levels, {} refs ({} val), {} train / {} val patches -> {}",
                m.levels.len(),
                m.refs.len(),
                m.refs_in(Split::Val).len(),
                m.patches(Split::Train).len(),
                m.patches(Split::Val).len(),
                out.join("manifest.json").display()
            );
        }
        Cmd::TrainRanker {
            config,
            manifest,
            out,
        } => {
            let cfg = config.load()?;
            let m = RankDatasetManifest::load(&manifest)?;
            let arch = RankerConfig::new(cfg.ranker.arch, cfg.ranker.base_channels);
            let o = train_ranker(&m, &cfg.ranker.train, arch, Some(&out))?;
            write_log(&out.join("train_log.jsonl"), &o.log)?;
            println!(
                "best val SROCC {:.4} at iteration {}",
                o.best_srocc, o.best_iter
            );
        }
        Cmd::EvalRanker {
            model,
            manifest,
            classes,
            out,
        } => {
            let r = RankerModel::load(&model)?;
            let mut result = serde_json::Map::new();
            if let Some(p) = manifest {
                let m = RankDatasetManifest::load(&p)?;
                let s = eval_srocc(&r, &m)?;
                println!("val SROCC {s:.4}");
                let sep = manifest_separation(&r, &m, Split::Val)?;
                print_separation(&sep);
                result.insert("val_srocc".into(), s.into());
                result.insert(
                    "separation".into(),
                    serde_json::to_value(&sep).map_err(|e| ExpError::Format(e.to_string()))?,
                );
            }
            if !classes.is_empty() {
                let sets: Vec<(String, PathBuf)> = classes.iter().map(|c| named(c)).collect();
                let sep = class_separation_report(&r, &sets)?;
                print_separation(&sep);
                result.insert(
                    "class_separation".into(),
                    serde_json::to_value(&sep).map_err(|e| ExpError::Format(e.to_string()))?,
                );
            }
            if result.is_empty() {
                return Err(ExpError::Config("give --manifest and/or --class".into()));
            }
            if let Some(o) = out {
                write_json(&o, &result)?;
            }
        }
        Cmd::RankScore { model, dir, out } => {
            let r = RankerModel::load(&model)?;
            let paths = ranksr_metrics::list_images(&dir)?;
            let mut entries = Vec::new();
            for p in &paths {
                let id = p
                    .file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned();
                entries.push((id, r.score(&ranksr_core::load_image(p)?)?));
            }
            let report = ScoreReport::new(
                "ranker",
                Polarity::LowerBetter,
                Provenance::Internal,
                entries,
            )?;
            report.save(&out)?;
            println!(
                "{} images, mean score {:.4}",
                report.len(),
                report.mean().unwrap_or(f64::NAN)
            );
        }
        Cmd::Pretrain {
            config,
            train,
            val,
            out,
        } => {
            let cfg = config.load()?;
            let data = PairedSet::load_dir(&train)?;
            let val = val.map(|v| PairedSet::load_dir(&v)).transpose()?;
            let o = pretrain_srresnet(&cfg.gan.pretrain, &data, val.as_ref(), Some(&out))?;
            if let Some(r) = o.log.last() {
                println!(
                    "iteration {}: mse {:.6} val psnr {:?} niqe {:?}",
                    r.iter, r.l_m, r.val_psnr, r.val_niqe
                );
            }
        }
        Cmd::TrainSr {
            config,
            train,
            val,
            rankers,
            monotone,
            pretrained,
            resume,
            out,
        } => {
            let cfg = config.load()?;
            let mut gan = cfg.gan.train.clone();
            let mut weights = cfg.gan.weights.clone();
            if let Some(m) = monotone {
                gan.monotone = Monotone::parse(&m)
                    .ok_or_else(|| ExpError::Config(format!("unknown monotone {m}")))?;
            }
            let mut models = Vec::new();
            let mut ws = Vec::new();
            for spec in &rankers {
                let (p, w) = parse_ranker(spec)?;
                models.push(RankerModel::load(&p)?);
                ws.push(w);
            }
            if ws.iter().any(Option::is_some) {
                weights.ranker_weights = ws
                    .iter()
                    .map(|w| w.unwrap_or(1.0 / ws.len() as f64))
                    .collect();
            }
            if models.is_empty() && weights.rank != 0.0 {
                log::warn!("no rankers given: the rank-content term is zero");
            }
            let data = PairedSet::load_dir(&train)?;
            let val = val.map(|v| PairedSet::load_dir(&v)).transpose()?;
            let state = out.join("state.safetensors");
            let mut t = if resume && state.exists() {
                GanTrainer::resume(&state, &models)?
            } else {
                let warm = pretrained
                    .map(|p| load_generator(&p).map(|(g, _)| g))
                    .transpose()?;
                GanTrainer::new(gan.clone(), &models, weights, warm)?
            };
            let total = t.cfg.total_iters;
            t.run(&data, val.as_ref(), total, Some(&out))?;
            t.save_outputs(&out)?;
            if let Some(r) = t.log.last() {
                println!(
                    "iteration {}: L_P {:.4} L_G {:.4} L_R {:.4} L_D {:.4} val psnr {:?} niqe {:?}",
                    r.iter, r.l_p, r.l_g, r.l_r, r.l_d, r.val_psnr, r.val_niqe
                );
            }
        }
        Cmd::Infer {
            model,
            input,
            out,
            tile,
            overlap,
        } => {
            let (g, _) = load_generator(&model)?;
            let tiles = tile.map(|tile| TileConfig { tile, overlap });
            let n = infer_dir(&g, &input, &out, tiles)?;
            println!("{n} images -> {}", out.display());
        }
        Cmd::Score {
            dir,
            ingest,
            metric,
            pristine,
            out,
        } => {
            let report = match (dir, ingest) {
                (Some(d), None) => {
                    if metric != "niqe" {
                        return Err(ExpError::Config(format!(
                            "{metric} cannot be computed internally; use --ingest"
                        )));
                    }
                    let model = match pristine {
                        Some(p) => ranksr_metrics::NiqeModel::load(&p)?,
                        None => ranksr_metrics::NiqeModel::canonical(),
                    };
                    batch_score(&NiqeMetric { model }, &d)?
                }
                (None, Some(f)) => {
                    let spec = match metric.as_str() {
                        "ma" => MetricSpec::ma(),
                        "pi" => MetricSpec::pi(),
                        "rmse" => MetricSpec::rmse(),
                        "niqe" => MetricSpec::niqe(),
                        m => return Err(ExpError::Config(format!("unknown metric {m}"))),
                    };
                    ingest_scores(&f, &spec)?
                }
                _ => {
                    return Err(ExpError::Config(
                        "give exactly one of --dir and --ingest".into(),
                    ))
                }
            };
            report.save(&out)?;
            println!(
                "{} scored, {} skipped, mean {:.4}",
                report.len(),
                report.skipped.len(),
                report.mean().unwrap_or(f64::NAN)
            );
        }
        Cmd::UpperBound { a, b } => {
            let ub = upper_bound(&ScoreReport::load(&a)?, &ScoreReport::load(&b)?)?;
            println!(
                "mean a {:.4}  mean b {:.4}  better {:?}",
                ub.mean_a, ub.mean_b, ub.better
            );
            println!("ub_mr {:.4}  ub_mc {:.4}", ub.ub_mr, ub.ub_mc);
        }
        Cmd::EvalSuite {
            config,
            methods,
            sets,
            out,
        } => {
            let cfg = config.load()?;
            let methods: Vec<Method> = methods.iter().map(|m| Method::parse(m)).collect();
            let sets: Vec<(String, PathBuf)> = sets.iter().map(|s| named(s)).collect();
            let opts = EvalOptions {
                metrics: cfg.eval.metrics.clone(),
                psnr_mode: cfg.eval.psnr_mode,
                tile: cfg.eval.tile,
                niqe_model: niqe_model(&cfg)?,
                ma_scores: cfg.eval.ma_scores.clone(),
            };
            let mut table = evaluate_suite(&methods, &sets, &opts, &out)?;
            table.config_hash = Some(cfg.hash());
            table.save(&out.join("table.json"))?;
            print!("{}", table.render());
        }
        Cmd::Plot { what } => match what {
            PlotCmd::Curves { logs, out } => {
                let runs = logs
                    .iter()
                    .map(|l| {
                        let (n, p) = named(l);
                        Ok((n, read_train_log(&p)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                for p in plot_training_curves(&runs, &out)? {
                    println!("{}", p.display());
                }
            }
            PlotCmd::Ranker { log, out } => {
                let log: Vec<LogRecord> = read_jsonl(&log)?;
                for p in plot_ranker_log(&log, &out)? {
                    println!("{}", p.display());
                }
            }
            PlotCmd::Hist {
                separation,
                reports,
                bins,
                out,
            } => {
                let h = match separation {
                    Some(p) => {
                        let text = std::fs::read_to_string(&p).map_err(|e| ExpError::Io {
                            path: p.clone(),
                            source: e,
                        })?;
                        let sep: SeparationReport = serde_json::from_str(&text)
                            .map_err(|e| ExpError::Format(e.to_string()))?;
                        plot_separation(&sep, &out)?
                    }
                    None => {
                        let classes = reports
                            .iter()
                            .map(|r| {
                                let (n, p) = named(r);
                                Ok((n, ScoreReport::load(&p)?.scores()))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        histogram_plot(&out, "scores", &classes, bins)?
                    }
                };
                println!("{} bins -> {}", h.edges.len() - 1, out.display());
            }
        },
        Cmd::Run { config, out } => {
            let mut cfg = ExperimentConfig::load(&config.config)?;
            if let Some(s) = config.seed {
                cfg.seed = s;
            }
            let o = run_pipeline(&cfg, &out)?;
            println!("{} (config {})", o.dir.display(), o.config_hash);
            println!("executed {:?}, up to date {:?}", o.executed, o.skipped);
            print!("{}", o.table.render());
        }
        Cmd::Params { config } => {
            let cfg = config.load()?;
            for arch in [Arch::Vgg8, Arch::Vgg12, Arch::Vgg16] {
                let r = RankerConfig::new(arch, cfg.ranker.base_channels);
                println!(
                    "ranker {arch:<6} convs {:>2} widths {:?}: {} params",
                    r.conv_layers(),
                    r.stage_widths(),
                    r.param_count()
                );
            }
            let g = Generator::<f32>::new(cfg.gan.train.generator, 0);
            println!(
                "generator {} blocks x {} channels: {} params",
                g.config.residual_blocks,
                g.config.base_channels,
                g.param_count()
            );
            let d = Discriminator::<f32>::new(cfg.gan.train.discriminator, 0);
            println!(
                "discriminator base {}: {} params",
                cfg.gan.train.discriminator.base_channels,
                d.param_count()
            );
        }
        Cmd::Synth {
            out,
            count,
            size,
            max_radius,
            seed,
        } => {
            std::fs::create_dir_all(&out).map_err(|e| ExpError::Io {
                path: out.clone(),
                source: e,
            })?;
            let gen = DeadLeaves {
                max_radius,
                ..DeadLeaves::default()
            };
            for i in 0..count {
                save_image(
                    &gen.render(size, size, seed + i as u64),
                    out.join(format!("leaves_{i:04}.png")),
                )?;
            }
            println!("{count} images -> {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
