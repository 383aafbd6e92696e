use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ranksr_core::{add_gaussian_noise, gaussian_blur, load_image, save_image, Image};
use ranksr_metrics::{batch_score, list_images, ImageMetric, ScoreReport};
use rayon::prelude::*;

use crate::manifest::FORMAT_VERSION;
use crate::{
    assign_labels, LabelEntry, LabelStrategy, Labeling, LevelImage, PatchSpec, RankDataError,
    RankDatasetManifest, RankLevel, RefInfo, Result, Source, Split,
};

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOptions {
    pub dataset_id: String,
    pub patch: PatchSpec,
    /// Fraction of reference images held out for validation.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            dataset_id: "rankset".into(),
            patch: PatchSpec::default(),
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

/// How the levels of an SR-results dataset get their scores.
pub enum LevelScores<'a> {
    Metric(&'a dyn ImageMetric),
    /// One report per level, in level order (e.g. ingested Ma or a fusion).
    Reports(Vec<ScoreReport>),
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn refs_of(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let v: Vec<(String, PathBuf)> = list_images(dir)?
        .into_iter()
        .map(|p| (stem(&p), p))
        .collect();
    if v.is_empty() {
        return Err(RankDataError::EmptyDir(dir.to_path_buf()));
    }
    Ok(v)
}

/// Shuffles the sorted reference ids with `seed` and holds out
/// `round(n * val_fraction)` of them (at least one of each split when n ≥ 2).
pub fn split_refs(ids: &[String], val_fraction: f64, seed: u64) -> BTreeMap<String, Split> {
    let mut sorted: Vec<&String> = ids.iter().collect::<BTreeSet<_>>().into_iter().collect();
    sorted.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = sorted.len();
    let mut n_val = (n as f64 * val_fraction).round() as usize;
    if n >= 2 {
        n_val = n_val.clamp(1, n - 1);
    } else {
        n_val = 0;
    }
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            (
                id.clone(),
                if i < n_val { Split::Val } else { Split::Train },
            )
        })
        .collect()
}

fn level_dims(
    level: &str,
    images: &[(String, PathBuf)],
) -> Result<BTreeMap<String, (usize, usize)>> {
    images
        .par_iter()
        .map(|(id, p)| {
            let img = load_image(p)?;
            Ok((id.clone(), (img.height(), img.width())))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().collect())
        .map_err(|e: RankDataError| match e {
            RankDataError::Imaging(inner) => RankDataError::Misaligned {
                level: level.into(),
                detail: inner.to_string(),
            },
            other => other,
        })
}

fn check_aligned(levels: &[RankLevel]) -> Result<Vec<String>> {
    let first: Vec<String> = levels[0].images.iter().map(|i| i.ref_id.clone()).collect();
    for l in &levels[1..] {
        let ids: Vec<&String> = l.images.iter().map(|i| &i.ref_id).collect();
        if ids != first.iter().collect::<Vec<_>>() {
            let a: BTreeSet<&String> = first.iter().collect();
            let b: BTreeSet<&String> = ids.into_iter().collect();
            let missing: Vec<&&String> = a.symmetric_difference(&b).take(3).collect();
            return Err(RankDataError::Misaligned {
                level: l.level_id.clone(),
                detail: format!("reference ids differ, e.g. {missing:?}"),
            });
        }
    }
    Ok(first)
}

fn assemble(
    opts: &BuildOptions,
    metric_id: &str,
    strategy: LabelStrategy,
    levels: Vec<RankLevel>,
    labeling: Labeling,
    scores: BTreeMap<String, ScoreReport>,
    dims: BTreeMap<String, (usize, usize)>,
) -> Result<RankDatasetManifest> {
    let ids: Vec<String> = dims.keys().cloned().collect();
    let split = split_refs(&ids, opts.val_fraction, opts.seed);
    let refs = dims
        .iter()
        .map(|(id, &(height, width))| RefInfo {
            ref_id: id.clone(),
            height,
            width,
            split: split[id],
        })
        .collect();
    let mut labels = Vec::new();
    for id in &ids {
        for l in &levels {
            let label = labeling.labels[&(id.clone(), l.level_id.clone())];
            let score = scores.get(&l.level_id).and_then(|r| r.get(id));
            labels.push(LabelEntry {
                ref_id: id.clone(),
                level_id: l.level_id.clone(),
                label,
                score,
            });
        }
    }
    let m = RankDatasetManifest {
        format_version: FORMAT_VERSION,
        dataset_id: opts.dataset_id.clone(),
        metric_id: metric_id.to_string(),
        strategy,
        patch_spec: opts.patch,
        levels,
        scores,
        labels,
        refs,
        ties: labeling.ties,
    };
    m.validate()?;
    Ok(m)
}

fn same_dims(
    reference: &BTreeMap<String, (usize, usize)>,
    other: &BTreeMap<String, (usize, usize)>,
    level: &str,
) -> Result<()> {
    for (id, d) in reference {
        if other.get(id) != Some(d) {
            return Err(RankDataError::SizeMismatch {
                ref_id: id.clone(),
                detail: format!("level {level} has {:?}, expected {d:?}", other.get(id)),
            });
        }
    }
    Ok(())
}

/// Levels of SR outputs (or ground truth) aligned by file stem, labeled
/// per `strategy` from lower-is-better scores.
pub fn build_sr_rankset(
    level_dirs: &[(String, PathBuf)],
    scores: LevelScores<'_>,
    strategy: LabelStrategy,
    opts: &BuildOptions,
) -> Result<RankDatasetManifest> {
    if level_dirs.len() < 2 {
        return Err(RankDataError::TooFewLevels(level_dirs.len()));
    }
    let mut levels = Vec::new();
    for (id, dir) in level_dirs {
        if levels.iter().any(|l: &RankLevel| &l.level_id == id) {
            return Err(RankDataError::DuplicateLevel(id.clone()));
        }
        let source = if matches!(id.as_str(), "hr" | "gt" | "ground_truth") {
            Source::GroundTruth
        } else {
            Source::SrResults
        };
        let images = refs_of(dir)?
            .into_iter()
            .map(|(ref_id, path)| LevelImage { ref_id, path })
            .collect();
        levels.push(RankLevel {
            level_id: id.clone(),
            source,
            group: "all".into(),
            images,
        });
    }
    check_aligned(&levels)?;
    let pairs = |l: &RankLevel| -> Vec<(String, PathBuf)> {
        l.images
            .iter()
            .map(|i| (i.ref_id.clone(), i.path.clone()))
            .collect()
    };
    let dims = level_dims(&levels[0].level_id, &pairs(&levels[0]))?;
    for l in &levels[1..] {
        same_dims(&dims, &level_dims(&l.level_id, &pairs(l))?, &l.level_id)?;
    }

    let reports: Vec<ScoreReport> = match scores {
        LevelScores::Metric(metric) => level_dirs
            .iter()
            .map(|(_, dir)| batch_score(metric, dir).map_err(RankDataError::from))
            .collect::<Result<_>>()?,
        LevelScores::Reports(r) => {
            if r.len() != levels.len() {
                return Err(RankDataError::Invalid(format!(
                    "{} score reports for {} levels",
                    r.len(),
                    levels.len()
                )));
            }
            r
        }
    };
    let metric_id = reports[0].metric_id.clone();
    let table: Vec<(&str, &ScoreReport)> = levels
        .iter()
        .map(|l| l.level_id.as_str())
        .zip(&reports)
        .collect();
    let labeling = assign_labels(&table, strategy)?;
    let scores = levels
        .iter()
        .map(|l| l.level_id.clone())
        .zip(reports.iter().cloned())
        .collect();
    assemble(opts, &metric_id, strategy, levels, labeling, scores, dims)
}

fn format_magnitude(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') {
        s
    } else {
        format!("{s}.0")
    }
}

fn ordinal_labeling(
    ids: &[String],
    levels: &[RankLevel],
    rank_of: &BTreeMap<String, u32>,
) -> Labeling {
    let mut out = Labeling::default();
    for id in ids {
        for l in levels {
            out.labels
                .insert((id.clone(), l.level_id.clone()), rank_of[&l.level_id]);
        }
    }
    out
}

fn write_level(out_dir: &Path, level_id: &str, ref_id: &str, img: &Image) -> Result<PathBuf> {
    let dir = out_dir.join(level_id);
    std::fs::create_dir_all(&dir).map_err(|e| RankDataError::Io {
        path: dir.clone(),
        source: e,
    })?;
    let path = dir.join(format!("{ref_id}.png"));
    save_image(img, &path)?;
    Ok(path)
}

/// `λ·left + (1−λ)·right` per coefficient, materialized under `out_dir`.
/// Smaller λ (closer to the right, ground-truth side) ranks better.
pub fn build_interp_rankset(
    left_dir: &Path,
    right_dir: &Path,
    lambdas: &[f64],
    opts: &BuildOptions,
    out_dir: &Path,
) -> Result<RankDatasetManifest> {
    if lambdas.len() < 2 {
        return Err(RankDataError::TooFewLevels(lambdas.len()));
    }
    if let Some(&bad) = lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(RankDataError::BadLambda(bad));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(RankDataError::DuplicateLevel(format!(
            "interp_{}",
            format_magnitude(sorted[0])
        )));
    }
    let left = refs_of(left_dir)?;
    let right = refs_of(right_dir)?;
    let lids: Vec<&String> = left.iter().map(|(id, _)| id).collect();
    let rids: Vec<&String> = right.iter().map(|(id, _)| id).collect();
    if lids != rids {
        return Err(RankDataError::Misaligned {
            level: "right".into(),
            detail: "left and right reference ids differ".into(),
        });
    }
    let level_ids: Vec<String> = lambdas
        .iter()
        .map(|&l| format!("interp_{}", format_magnitude(l)))
        .collect();
    let rendered: Vec<(String, (usize, usize), Vec<PathBuf>)> = left
        .par_iter()
        .zip(right.par_iter())
        .map(|((id, lp), (_, rp))| {
            let a = load_image(lp)?;
            let b = load_image(rp)?;
            if a.shape() != b.shape() {
                return Err(RankDataError::SizeMismatch {
                    ref_id: id.clone(),
                    detail: format!("left {:?} vs right {:?}", a.shape(), b.shape()),
                });
            }
            let paths = lambdas
                .iter()
                .zip(&level_ids)
                .map(|(&lambda, level)| {
                    write_level(out_dir, level, id, &a.blend(&b, lambda as f32)?)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((id.clone(), (a.height(), a.width()), paths))
        })
        .collect::<Result<_>>()?;

    let levels: Vec<RankLevel> = level_ids
        .iter()
        .enumerate()
        .map(|(k, level)| RankLevel {
            level_id: level.clone(),
            source: Source::Interpolation,
            group: "interp".into(),
            images: rendered
                .iter()
                .map(|(id, _, p)| LevelImage {
                    ref_id: id.clone(),
                    path: p[k].clone(),
                })
                .collect(),
        })
        .collect();
    let rank_of: BTreeMap<String, u32> = lambdas
        .iter()
        .zip(&level_ids)
        .map(|(l, id)| {
            (
                id.clone(),
                sorted.iter().position(|s| s == l).unwrap() as u32 + 1,
            )
        })
        .collect();
    let ids: Vec<String> = rendered.iter().map(|(id, _, _)| id.clone()).collect();
    let dims = rendered.iter().map(|(id, d, _)| (id.clone(), *d)).collect();
    let labeling = ordinal_labeling(&ids, &levels, &rank_of);
    assemble(
        opts,
        "ordinal",
        LabelStrategy::Ordinal,
        levels,
        labeling,
        BTreeMap::new(),
        dims,
    )
}

fn noise_seed(seed: u64, ref_index: usize, level_index: usize) -> u64 {
    seed ^ (ref_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (level_index as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

/// Gaussian blur and/or noise families over ground-truth images. Each
/// non-empty family becomes a group whose milder levels rank better.
pub fn build_distortion_rankset(
    hr_dir: &Path,
    blur_sigmas: &[f64],
    noise_sigmas: &[f64],
    opts: &BuildOptions,
    out_dir: &Path,
) -> Result<RankDatasetManifest> {
    let families: Vec<(&str, &[f64])> = [("blur", blur_sigmas), ("noise", noise_sigmas)]
        .into_iter()
        .filter(|(_, s)| !s.is_empty())
        .collect();
    if families.is_empty() {
        return Err(RankDataError::TooFewLevels(0));
    }
    let mut specs: Vec<(String, &str, f64)> = Vec::new();
    let mut rank_of = BTreeMap::new();
    for (family, sigmas) in &families {
        if sigmas.len() < 2 {
            return Err(RankDataError::TooFewLevels(sigmas.len()));
        }
        if let Some(&bad) = sigmas.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(RankDataError::BadMagnitude(bad));
        }
        let mut sorted = sigmas.to_vec();
        sorted.sort_by(f64::total_cmp);
        for &s in sigmas.iter() {
            let id = format!("{family}_{}", format_magnitude(s));
            if rank_of.contains_key(&id) {
                return Err(RankDataError::DuplicateLevel(id));
            }
            rank_of.insert(
                id.clone(),
                sorted.iter().position(|v| *v == s).unwrap() as u32 + 1,
            );
            specs.push((id, family, s));
        }
    }
    let hr = refs_of(hr_dir)?;
    let rendered: Vec<(String, (usize, usize), Vec<PathBuf>)> = hr
        .par_iter()
        .enumerate()
        .map(|(ri, (id, p))| {
            let img = load_image(p)?;
            let paths = specs
                .iter()
                .enumerate()
                .map(|(li, (level, family, s))| {
                    let out = if *family == "blur" {
                        gaussian_blur(&img, *s)?
                    } else {
                        add_gaussian_noise(&img, *s, noise_seed(opts.seed, ri, li))?
                    };
                    write_level(out_dir, level, id, &out)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((id.clone(), (img.height(), img.width()), paths))
        })
        .collect::<Result<_>>()?;

    let levels: Vec<RankLevel> = specs
        .iter()
        .enumerate()
        .map(|(k, (level, family, _))| RankLevel {
            level_id: level.clone(),
            source: Source::Distortion,
            group: family.to_string(),
            images: rendered
                .iter()
                .map(|(id, _, p)| LevelImage {
                    ref_id: id.clone(),
                    path: p[k].clone(),
                })
                .collect(),
        })
        .collect();
    let ids: Vec<String> = rendered.iter().map(|(id, _, _)| id.clone()).collect();
    let dims = rendered.iter().map(|(id, d, _)| (id.clone(), *d)).collect();
    let labeling = ordinal_labeling(&ids, &levels, &rank_of);
    assemble(
        opts,
        "ordinal",
        LabelStrategy::Ordinal,
        levels,
        labeling,
        BTreeMap::new(),
        dims,
    )
}
