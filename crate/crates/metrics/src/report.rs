use std::collections::HashSet;
use std::path::{Path, PathBuf};

use ranksr_core::{load_image, Image};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{MetricError, MetricSpec, Polarity, Result};

const FORMAT_VERSION: u32 = 1;

/// A metric that scores a single image without a reference.
pub trait ImageMetric: Sync {
    fn id(&self) -> &str;
    fn polarity(&self) -> Polarity;
    fn score(&self, img: &Image) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Internal,
    Ingested,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub image_id: String,
    pub reason: String,
}

/// Per-image scores of one metric, sorted by image id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub format_version: u32,
    pub metric_id: String,
    pub polarity: Polarity,
    pub provenance: Provenance,
    pub entries: Vec<(String, f64)>,
    #[serde(default)]
    pub skipped: Vec<Skipped>,
}

impl ScoreReport {
    pub fn new(
        metric_id: impl Into<String>,
        polarity: Polarity,
        provenance: Provenance,
        mut entries: Vec<(String, f64)>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for (id, s) in &entries {
            if !s.is_finite() {
                return Err(MetricError::NonFinite);
            }
            if !seen.insert(id.as_str()) {
                return Err(MetricError::DuplicateId(id.clone()));
            }
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Self {
            format_version: FORMAT_VERSION,
            metric_id: metric_id.into(),
            polarity,
            provenance,
            entries,
            skipped: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<f64> {
        self.entries
            .binary_search_by(|(id, _)| id.as_str().cmp(image_id))
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, s)| *s).collect()
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.scores().iter().sum::<f64>() / self.len() as f64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, text).map_err(|e| MetricError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MetricError::io(path, e))?;
        let bad = |reason: String| MetricError::Format {
            path: path.to_path_buf(),
            reason,
        };
        let doc: ScoreReport = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if doc.format_version != FORMAT_VERSION {
            return Err(bad(format!(
                "unsupported format_version {}",
                doc.format_version
            )));
        }
        let skipped = doc.skipped;
        let mut report = Self::new(doc.metric_id, doc.polarity, doc.provenance, doc.entries)?;
        report.skipped = skipped;
        Ok(report)
    }
}

/// PNG files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| MetricError::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let path = entry.map_err(|e| MetricError::io(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub(crate) fn image_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Scores every PNG in `dir` in parallel; unreadable or unscoreable images
/// are logged and listed under `skipped`.
pub fn batch_score(metric: &dyn ImageMetric, dir: &Path) -> Result<ScoreReport> {
    let paths = list_images(dir)?;
    let results: Vec<(String, std::result::Result<f64, String>)> = paths
        .par_iter()
        .map(|p| {
            let id = image_id(p);
            let r = load_image(p)
                .map_err(MetricError::from)
                .and_then(|img| metric.score(&img))
                .map_err(|e| e.to_string());
            (id, r)
        })
        .collect();
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (id, r) in results {
        match r {
            Ok(s) => entries.push((id, s)),
            Err(reason) => {
                log::warn!("skipping {id}: {reason}");
                skipped.push(Skipped {
                    image_id: id,
                    reason,
                });
            }
        }
    }
    let mut report = ScoreReport::new(
        metric.id(),
        metric.polarity(),
        Provenance::Internal,
        entries,
    )?;
    report.skipped = skipped;
    Ok(report)
}

/// Reads `image_id<TAB>score` lines; blank lines and `#` comments are ignored.
pub fn read_score_file(path: &Path) -> Result<Vec<(String, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| MetricError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |reason: &str| MetricError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            reason: reason.to_string(),
        };
        let (id, score) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected a tab"))?;
        let score: f64 = score
            .trim()
            .parse()
            .map_err(|_| parse_err("score is not a number"))?;
        if id.is_empty() {
            return Err(parse_err("empty image id"));
        }
        out.push((id.to_string(), score));
    }
    Ok(out)
}

pub fn write_score_file(path: &Path, entries: &[(String, f64)]) -> Result<()> {
    let mut text = String::new();
    for (id, s) in entries {
        text.push_str(&format!("{id}\t{s}\n"));
    }
    std::fs::write(path, text).map_err(|e| MetricError::io(path, e))
}

/// Externally computed scores (for example Ma), normalized to
/// lower-is-better through `spec`.
pub fn ingest_scores(path: &Path, spec: &MetricSpec) -> Result<ScoreReport> {
    let rows = read_score_file(path)?;
    let entries = rows
        .into_iter()
        .map(|(id, s)| (id, spec.normalize(s)))
        .collect();
    ScoreReport::new(
        spec.id.clone(),
        Polarity::LowerBetter,
        Provenance::Ingested,
        entries,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ranksr_core::{save_image, synthetic};

    struct MeanMetric;

    impl ImageMetric for MeanMetric {
        fn id(&self) -> &str {
            "mean"
        }
        fn polarity(&self) -> Polarity {
            Polarity::LowerBetter
        }
        fn score(&self, img: &Image) -> Result<f64> {
            Ok(img.mean())
        }
    }

    #[test]
    fn empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        let r = batch_score(&MeanMetric, dir.path()).unwrap();
        assert!(r.is_empty() && r.skipped.is_empty());
    }

    #[test]
    fn scores_skips_and_is_repeatable() {
        let dir = tempfile::tempdir().unwrap();
        for (i, name) in ["b", "a", "c"].iter().enumerate() {
            save_image(
                &synthetic::dead_leaves(16, 16, i as u64),
                dir.path().join(format!("{name}.png")),
            )
            .unwrap();
        }
        std::fs::write(dir.path().join("broken.png"), b"not a png").unwrap();
        std::fs::write(dir.path().join("notes.txt"), b"ignored").unwrap();
        let r = batch_score(&MeanMetric, dir.path()).unwrap();
        assert_eq!(r.ids().collect::<Vec<_>>(), ["a", "b", "c"]);
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.skipped[0].image_id, "broken");
        assert_eq!(r.provenance, Provenance::Internal);
        assert_eq!(r, batch_score(&MeanMetric, dir.path()).unwrap());

        let path = dir.path().join("report.json");
        r.save(&path).unwrap();
        assert_eq!(ScoreReport::load(&path).unwrap(), r);
    }

    #[test]
    fn ingest_ma_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ma.tsv");
        let rows: Vec<(String, f64)> = (0..7)
            .map(|i| (format!("img{i}"), 5.0 + i as f64 * 0.5))
            .collect();
        write_score_file(&path, &rows).unwrap();
        let r = ingest_scores(&path, &MetricSpec::ma()).unwrap();
        assert_eq!(r.len(), 7);
        assert_eq!(r.provenance, Provenance::Ingested);
        assert_eq!(r.polarity, Polarity::LowerBetter);
        assert_eq!(r.get("img2"), Some(10.0 - 6.0));
    }

    #[test]
    fn rejects_bad_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        std::fs::write(&path, "a\t1.0\nb 2.0\n").unwrap();
        assert!(matches!(
            read_score_file(&path),
            Err(MetricError::Parse { line: 2, .. })
        ));
        std::fs::write(&path, "a\t1.0\na\t2.0\n").unwrap();
        assert!(matches!(
            ingest_scores(&path, &MetricSpec::niqe()),
            Err(MetricError::DuplicateId(_))
        ));
        std::fs::write(&path, "a\tNaN\n").unwrap();
        assert!(matches!(
            ingest_scores(&path, &MetricSpec::niqe()),
            Err(MetricError::NonFinite)
        ));
    }
}
