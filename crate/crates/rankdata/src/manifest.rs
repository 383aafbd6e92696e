use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use ranksr_core::patch_grid;
use ranksr_metrics::ScoreReport;
use serde::{Deserialize, Serialize};

use crate::{LabelStrategy, RankDataError, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Where the images of a level come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Source {
    SrResults,
    Interpolation,
    Distortion,
    GroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSpec {
    pub size: usize,
    pub stride: usize,
}

impl Default for PatchSpec {
    fn default() -> Self {
        Self {
            size: 296,
            stride: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelImage {
    pub ref_id: String,
    pub path: PathBuf,
}

/// One perceptual level: the same reference contents rendered one way.
/// Levels sharing a `group` are ranked against each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankLevel {
    pub level_id: String,
    pub source: Source,
    pub group: String,
    pub images: Vec<LevelImage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub ref_id: String,
    pub level_id: String,
    /// 1 is best.
    pub label: u32,
    /// Lower-is-better metric value, absent for ordinal datasets.
    pub score: Option<f64>,
}

/// Levels whose scores tied on one reference; their labels follow the
/// declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tie {
    pub ref_id: String,
    pub levels: Vec<String>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefInfo {
    pub ref_id: String,
    pub height: usize,
    pub width: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDatasetManifest {
    pub format_version: u32,
    pub dataset_id: String,
    /// Metric behind the labels, or `"ordinal"`.
    pub metric_id: String,
    pub strategy: LabelStrategy,
    pub patch_spec: PatchSpec,
    pub levels: Vec<RankLevel>,
    #[serde(default)]
    pub scores: BTreeMap<String, ScoreReport>,
    pub labels: Vec<LabelEntry>,
    pub refs: Vec<RefInfo>,
    #[serde(default)]
    pub ties: Vec<Tie>,
}

/// A patch position at one level of one reference image.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchRef {
    pub ref_id: String,
    pub level_id: String,
    pub path: PathBuf,
    pub offset: (usize, usize),
    pub size: usize,
    pub label: u32,
    pub score: Option<f64>,
}

impl RankDatasetManifest {
    /// Checks alignment, label permutations and the split.
    pub fn validate(&self) -> Result<()> {
        if self.levels.len() < 2 {
            return Err(RankDataError::TooFewLevels(self.levels.len()));
        }
        let ids: BTreeSet<&str> = self.refs.iter().map(|r| r.ref_id.as_str()).collect();
        if ids.len() != self.refs.len() {
            return Err(RankDataError::Invalid("duplicate reference ids".into()));
        }
        let mut seen_levels = BTreeSet::new();
        for level in &self.levels {
            if !seen_levels.insert(level.level_id.as_str()) {
                return Err(RankDataError::DuplicateLevel(level.level_id.clone()));
            }
            let mine: BTreeSet<&str> = level.images.iter().map(|i| i.ref_id.as_str()).collect();
            if mine != ids || mine.len() != level.images.len() {
                return Err(RankDataError::Misaligned {
                    level: level.level_id.clone(),
                    detail: "reference ids differ from the dataset".into(),
                });
            }
        }
        for (group, members) in self.groups() {
            if members.len() < 2 {
                return Err(RankDataError::Invalid(format!(
                    "group {group} has a single level"
                )));
            }
            for r in &self.refs {
                let mut got: Vec<u32> = members
                    .iter()
                    .map(|&l| {
                        self.label(&r.ref_id, &self.levels[l].level_id)
                            .ok_or_else(|| {
                                RankDataError::Invalid(format!(
                                    "no label for {} at {}",
                                    r.ref_id, self.levels[l].level_id
                                ))
                            })
                    })
                    .collect::<Result<_>>()?;
                got.sort_unstable();
                if got != (1..=members.len() as u32).collect::<Vec<_>>() {
                    return Err(RankDataError::Invalid(format!(
                        "labels of {} in group {group} are not a permutation",
                        r.ref_id
                    )));
                }
            }
        }
        if self.labels.len() != self.refs.len() * self.levels.len() {
            return Err(RankDataError::Invalid("label table size".into()));
        }
        for r in &self.refs {
            patch_grid(
                r.height,
                r.width,
                self.patch_spec.size,
                self.patch_spec.stride,
            )?;
        }
        Ok(())
    }

    /// Level indices per group, in declaration order.
    pub fn groups(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut g: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, l) in self.levels.iter().enumerate() {
            g.entry(l.group.as_str()).or_default().push(i);
        }
        g
    }

    fn entry(&self, ref_id: &str, level_id: &str) -> Option<&LabelEntry> {
        self.labels
            .iter()
            .find(|e| e.ref_id == ref_id && e.level_id == level_id)
    }

    pub fn label(&self, ref_id: &str, level_id: &str) -> Option<u32> {
        self.entry(ref_id, level_id).map(|e| e.label)
    }

    pub fn score(&self, ref_id: &str, level_id: &str) -> Option<f64> {
        self.entry(ref_id, level_id).and_then(|e| e.score)
    }

    pub fn refs_in(&self, split: Split) -> Vec<&RefInfo> {
        self.refs.iter().filter(|r| r.split == split).collect()
    }

    pub fn offsets(&self, r: &RefInfo) -> Vec<(usize, usize)> {
        patch_grid(
            r.height,
            r.width,
            self.patch_spec.size,
            self.patch_spec.stride,
        )
        .unwrap_or_default()
    }

    pub fn image_path(&self, ref_id: &str, level_id: &str) -> Option<&Path> {
        let level = self.levels.iter().find(|l| l.level_id == level_id)?;
        level
            .images
            .iter()
            .find(|i| i.ref_id == ref_id)
            .map(|i| i.path.as_path())
    }

    /// Every patch of every level in `split`, ordered by reference,
    /// position, then level.
    pub fn patches(&self, split: Split) -> Vec<PatchRef> {
        let lookup = self.lookup();
        let mut out = Vec::new();
        for r in self.refs_in(split) {
            for offset in self.offsets(r) {
                for level in &self.levels {
                    let (path, e) = &lookup[&(r.ref_id.as_str(), level.level_id.as_str())];
                    out.push(PatchRef {
                        ref_id: r.ref_id.clone(),
                        level_id: level.level_id.clone(),
                        path: path.to_path_buf(),
                        offset,
                        size: self.patch_spec.size,
                        label: e.label,
                        score: e.score,
                    });
                }
            }
        }
        out
    }

    pub(crate) fn lookup(&self) -> HashMap<(&str, &str), (&Path, &LabelEntry)> {
        let labels: HashMap<(&str, &str), &LabelEntry> = self
            .labels
            .iter()
            .map(|e| ((e.ref_id.as_str(), e.level_id.as_str()), e))
            .collect();
        let mut out = HashMap::new();
        for level in &self.levels {
            for img in &level.images {
                let key = (img.ref_id.as_str(), level.level_id.as_str());
                if let Some(e) = labels.get(&key) {
                    out.insert(key, (img.path.as_path(), *e));
                }
            }
        }
        out
    }

    /// Writes JSON; image paths under the manifest's directory are stored
    /// relative to it.
    pub fn save(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new(""));
        let mut copy = self.clone();
        for level in &mut copy.levels {
            for img in &mut level.images {
                if let Ok(rel) = img.path.strip_prefix(base) {
                    img.path = rel.to_path_buf();
                }
            }
        }
        if !base.as_os_str().is_empty() {
            std::fs::create_dir_all(base).map_err(|e| RankDataError::Io {
                path: base.to_path_buf(),
                source: e,
            })?;
        }
        let text = serde_json::to_string_pretty(&copy).map_err(|e| RankDataError::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        std::fs::write(path, text).map_err(|e| RankDataError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RankDataError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut m: Self = serde_json::from_str(&text).map_err(|e| RankDataError::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        if m.format_version != FORMAT_VERSION {
            return Err(RankDataError::Format {
                path: path.to_path_buf(),
                reason: format!("unsupported format_version {}", m.format_version),
            });
        }
        let base = path.parent().unwrap_or(Path::new(""));
        for level in &mut m.levels {
            for img in &mut level.images {
                if img.path.is_relative() {
                    img.path = base.join(&img.path);
                }
            }
        }
        m.validate()?;
        Ok(m)
    }
}
