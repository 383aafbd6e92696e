use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ranksr_core::{load_image, psnr, save_image, Image, PsnrMode};
use ranksr_metrics::{
    batch_score, pi, read_score_file, NiqeConfig, NiqeMetric, NiqeModel, Polarity, Provenance,
    ScoreReport, Skipped,
};
use ranksr_srgan::{bicubic_upscale, infer_sr, load_generator, Generator, PairedSet, TileConfig};
use serde::{Deserialize, Serialize};

use crate::{ExpError, Result};

/// A super-resolution method under evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Method {
    Bicubic,
    Checkpoint { name: String, path: PathBuf },
}

impl Method {
    pub fn name(&self) -> &str {
        match self {
            Self::Bicubic => "bicubic",
            Self::Checkpoint { name, .. } => name,
        }
    }

    /// `bicubic`, `name=path` or a bare checkpoint path named by its stem.
    pub fn parse(s: &str) -> Self {
        if s == "bicubic" {
            return Self::Bicubic;
        }
        match s.split_once('=') {
            Some((name, path)) => Self::Checkpoint {
                name: name.into(),
                path: path.into(),
            },
            None => {
                let path = PathBuf::from(s);
                let name = path
                    .file_stem()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| s.into());
                Self::Checkpoint { name, path }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    /// Any of `niqe`, `psnr`, `pi`.
    pub metrics: Vec<String>,
    pub psnr_mode: PsnrMode,
    pub tile: Option<TileConfig>,
    pub niqe_model: NiqeModel,
    /// Raw Ma scores as `<dir>/<method>/<dataset>.txt` score files.
    pub ma_scores: Option<PathBuf>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            metrics: vec!["niqe".into(), "psnr".into()],
            psnr_mode: PsnrMode::Luma,
            tile: None,
            niqe_model: NiqeModel::canonical(),
            ma_scores: None,
        }
    }
}

/// One table entry: the mean of a persisted per-image report, or the reason
/// it is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub value: Option<f64>,
    pub report: Option<PathBuf>,
    pub error: Option<String>,
}

impl EvalCell {
    fn failed(reason: impl Into<String>) -> Self {
        Self {
            value: None,
            report: None,
            error: Some(reason.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    pub dataset: String,
    pub images: usize,
    pub cells: BTreeMap<String, EvalCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub metrics: Vec<String>,
    pub psnr_mode: PsnrMode,
    pub niqe_config: NiqeConfig,
    pub tile: Option<TileConfig>,
    /// Dataset id to the directory it was read from.
    pub datasets: BTreeMap<String, PathBuf>,
    pub config_hash: Option<String>,
    pub rows: Vec<EvalRow>,
}

impl EvalTable {
    pub fn row(&self, method: &str, dataset: &str) -> Option<&EvalRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.dataset == dataset)
    }

    pub fn value(&self, method: &str, dataset: &str, metric: &str) -> Option<f64> {
        self.row(method, dataset)?.cells.get(metric)?.value
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| ExpError::Format(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| ExpError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ExpError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| ExpError::Format(e.to_string()))
    }

    /// Fixed-width text rendering, one row per (method, dataset).
    pub fn render(&self) -> String {
        let mut out = format!("{:<16} {:<12} {:>5}", "method", "dataset", "n");
        for m in &self.metrics {
            let head = if m == "psnr" {
                format!("psnr({:?})", self.psnr_mode).to_lowercase()
            } else {
                m.clone()
            };
            out.push_str(&format!(" {head:>11}"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{:<16} {:<12} {:>5}",
                r.method, r.dataset, r.images
            ));
            for m in &self.metrics {
                match r.cells.get(m).and_then(|c| c.value) {
                    Some(v) => out.push_str(&format!(" {v:>11.4}")),
                    None => out.push_str(&format!(" {:>11}", "error")),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn check_metrics(metrics: &[String]) -> Result<()> {
    if metrics.is_empty() {
        return Err(ExpError::Config("no evaluation metrics".into()));
    }
    for m in metrics {
        if !["niqe", "psnr", "pi"].contains(&m.as_str()) {
            return Err(ExpError::Config(format!("unknown eval metric {m}")));
        }
    }
    Ok(())
}

fn super_resolve_set(
    g: Option<&Generator<f32>>,
    set: &PairedSet,
    tile: Option<TileConfig>,
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| ExpError::io(dir, e))?;
    for (id, lr) in set.ids.iter().zip(&set.lr) {
        let sr = match g {
            Some(g) => infer_sr(g, lr, tile)?,
            None => bicubic_upscale(lr)?,
        };
        save_image(&sr, dir.join(format!("{id}.png")))?;
    }
    Ok(())
}

fn save_report(report: &ScoreReport, path: PathBuf) -> Result<EvalCell> {
    report.save(&path)?;
    let error =
        (!report.skipped.is_empty()).then(|| format!("{} images skipped", report.skipped.len()));
    Ok(EvalCell {
        value: report.mean(),
        report: Some(path),
        error,
    })
}

fn psnr_report(set: &PairedSet, sr_dir: &Path, mode: PsnrMode) -> Result<ScoreReport> {
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (id, hr) in set.ids.iter().zip(&set.hr) {
        let sr: Image = load_image(sr_dir.join(format!("{id}.png")))?;
        match psnr(&sr, hr, mode)?.db() {
            Some(db) => entries.push((id.clone(), db)),
            None => skipped.push(Skipped {
                image_id: id.clone(),
                reason: "identical to the reference".into(),
            }),
        }
    }
    let mut r = ScoreReport::new(
        "psnr",
        Polarity::HigherBetter,
        Provenance::Internal,
        entries,
    )?;
    r.skipped = skipped;
    Ok(r)
}

fn pi_report(niqe_report: &ScoreReport, ma_file: &Path) -> Result<ScoreReport> {
    let ma: BTreeMap<String, f64> = read_score_file(ma_file)?.into_iter().collect();
    let mut entries = Vec::new();
    for (id, n) in &niqe_report.entries {
        let m = ma.get(id).ok_or_else(|| {
            ExpError::Misaligned(format!("{} has no Ma score for {id}", ma_file.display()))
        })?;
        entries.push((id.clone(), pi(*n, *m)?));
    }
    Ok(ScoreReport::new(
        "pi",
        Polarity::LowerBetter,
        Provenance::Ingested,
        entries,
    )?)
}

fn score_row(
    set: &PairedSet,
    sr_dir: &Path,
    row_dir: &Path,
    method: &str,
    dataset: &str,
    opts: &EvalOptions,
) -> BTreeMap<String, EvalCell> {
    let niqe = (opts.metrics.iter().any(|m| m == "niqe" || m == "pi")).then(|| {
        batch_score(
            &NiqeMetric {
                model: opts.niqe_model.clone(),
            },
            sr_dir,
        )
    });
    let mut cells = BTreeMap::new();
    for m in &opts.metrics {
        let cell = match m.as_str() {
            "niqe" => match niqe.as_ref().expect("niqe computed") {
                Ok(r) => save_report(r, row_dir.join("niqe.json")),
                Err(e) => Err(ExpError::Stage {
                    stage: "niqe".into(),
                    reason: e.to_string(),
                }),
            },
            "psnr" => psnr_report(set, sr_dir, opts.psnr_mode)
                .and_then(|r| save_report(&r, row_dir.join("psnr.json"))),
            "pi" => match (&opts.ma_scores, niqe.as_ref().expect("niqe computed")) {
                (None, _) => Err(ExpError::Config("PI needs ingested Ma scores".into())),
                (_, Err(e)) => Err(ExpError::Stage {
                    stage: "niqe".into(),
                    reason: e.to_string(),
                }),
                (Some(dir), Ok(n)) => {
                    pi_report(n, &dir.join(method).join(format!("{dataset}.txt")))
                        .and_then(|r| save_report(&r, row_dir.join("pi.json")))
                }
            },
            _ => unreachable!("metrics checked"),
        };
        cells.insert(
            m.clone(),
            cell.unwrap_or_else(|e| EvalCell::failed(e.to_string())),
        );
    }
    cells
}

/// Super-resolves every test set with every method and scores the outputs.
/// SR images land in `out_dir/<method>/<dataset>/images`, per-image reports
/// next to them. Failures are recorded in the affected cells.
pub fn evaluate_suite(
    methods: &[Method],
    test_sets: &[(String, PathBuf)],
    opts: &EvalOptions,
    out_dir: &Path,
) -> Result<EvalTable> {
    check_metrics(&opts.metrics)?;
    let mut sets = Vec::new();
    for (id, dir) in test_sets {
        sets.push((id.clone(), PairedSet::load_dir(dir)?));
    }
    let mut rows = Vec::new();
    for method in methods {
        let generator = match method {
            Method::Bicubic => Ok(None),
            Method::Checkpoint { path, .. } => load_generator(path).map(|(g, _)| Some(g)),
        };
        for (dataset, set) in &sets {
            let row_dir = out_dir.join(method.name()).join(dataset);
            let sr_dir = row_dir.join("images");
            let cells = match &generator {
                Err(e) => opts
                    .metrics
                    .iter()
                    .map(|m| (m.clone(), EvalCell::failed(e.to_string())))
                    .collect(),
                Ok(g) => match super_resolve_set(g.as_ref(), set, opts.tile, &sr_dir) {
                    Err(e) => opts
                        .metrics
                        .iter()
                        .map(|m| (m.clone(), EvalCell::failed(e.to_string())))
                        .collect(),
                    Ok(()) => score_row(set, &sr_dir, &row_dir, method.name(), dataset, opts),
                },
            };
            rows.push(EvalRow {
                method: method.name().into(),
                dataset: dataset.clone(),
                images: set.len(),
                cells,
            });
        }
    }
    Ok(EvalTable {
        metrics: opts.metrics.clone(),
        psnr_mode: opts.psnr_mode,
        niqe_config: *opts.niqe_model.config(),
        tile: opts.tile,
        datasets: test_sets.iter().cloned().collect(),
        config_hash: None,
        rows,
    })
}
