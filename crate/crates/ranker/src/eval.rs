use std::path::PathBuf;

use ranksr_core::load_image;
use ranksr_metrics::list_images;
use serde::{Deserialize, Serialize};

use crate::{RankerError, RankerModel, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class_id: String,
    pub count: usize,
    /// Raw score statistics.
    pub raw_mean: f64,
    pub raw_std: f64,
    /// Statistics after min-max normalizing all pooled scores to `[0, 1]`.
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub classes: Vec<ClassStats>,
    /// Population standard deviation of the normalized class means.
    pub std_of_means: f64,
    /// Normalized scores per class, for histograms.
    pub normalized: Vec<(String, Vec<f64>)>,
}

impl SeparationReport {
    /// Class ids sorted from best (lowest mean score) to worst.
    pub fn order(&self) -> Vec<&str> {
        let mut c: Vec<&ClassStats> = self.classes.iter().collect();
        c.sort_by(|a, b| a.raw_mean.total_cmp(&b.raw_mean));
        c.into_iter().map(|s| s.class_id.as_str()).collect()
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (
        m,
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt(),
    )
}

/// Scores every image of each class directory and summarizes per class.
pub fn class_separation_report(
    model: &RankerModel,
    sets: &[(String, PathBuf)],
) -> Result<SeparationReport> {
    let mut raw = Vec::new();
    for (id, dir) in sets {
        let scores = list_images(dir)?
            .iter()
            .map(|p| model.score(&load_image(p)?))
            .collect::<Result<Vec<f64>>>()?;
        if scores.is_empty() {
            return Err(RankerError::EmptyClass(id.clone()));
        }
        raw.push((id.clone(), scores));
    }
    separation_from_scores(raw)
}

/// [`class_separation_report`] over precomputed scores.
pub fn separation_from_scores(raw: Vec<(String, Vec<f64>)>) -> Result<SeparationReport> {
    if let Some((id, _)) = raw.iter().find(|(_, s)| s.is_empty()) {
        return Err(RankerError::EmptyClass(id.clone()));
    }
    let all = raw.iter().flat_map(|(_, s)| s.iter().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut classes = Vec::new();
    let mut normalized = Vec::new();
    for (id, scores) in raw {
        let norm: Vec<f64> = scores.iter().map(|s| (s - lo) / span).collect();
        let (raw_mean, raw_std) = mean_std(&scores);
        let (mean, std) = mean_std(&norm);
        classes.push(ClassStats {
            class_id: id.clone(),
            count: scores.len(),
            raw_mean,
            raw_std,
            mean,
            std,
        });
        normalized.push((id, norm));
    }
    let means: Vec<f64> = classes.iter().map(|c| c.mean).collect();
    let std_of_means = mean_std(&means).1;
    Ok(SeparationReport {
        classes,
        std_of_means,
        normalized,
    })
}
