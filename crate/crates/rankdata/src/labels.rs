use std::collections::{BTreeMap, BTreeSet};

use ranksr_metrics::ScoreReport;
use serde::{Deserialize, Serialize};

use crate::{RankDataError, Result, Tie};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LabelStrategy {
    /// Rank the levels of every reference by that reference's scores.
    #[default]
    MetricRank,
    /// One fixed rank per level, from the level's mean score.
    ModelClassification,
    /// Ranks given by construction (distortion magnitude, interpolation weight).
    Ordinal,
}

/// Labels keyed by `(ref_id, level_id)`, 1 = best.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Labeling {
    pub labels: BTreeMap<(String, String), u32>,
    pub ties: Vec<Tie>,
}

/// Positions `1..=K` of `scores` sorted ascending; ties keep input order.
fn order_labels(scores: &[f64]) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut labels = vec![0; scores.len()];
    for (rank, &i) in idx.iter().enumerate() {
        labels[i] = rank as u32 + 1;
    }
    labels
}

fn tie_groups(ref_id: &str, ids: &[&str], scores: &[f64]) -> Vec<Tie> {
    let mut by_score: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, s) in scores.iter().enumerate() {
        by_score.entry(s.to_bits()).or_default().push(i);
    }
    by_score
        .into_values()
        .filter(|v| v.len() > 1)
        .map(|v| Tie {
            ref_id: ref_id.to_string(),
            levels: v.iter().map(|&i| ids[i].to_string()).collect(),
            score: scores[v[0]],
        })
        .collect()
}

/// Labels aligned per-level score reports (lower is better).
pub fn assign_labels(levels: &[(&str, &ScoreReport)], strategy: LabelStrategy) -> Result<Labeling> {
    if levels.len() < 2 {
        return Err(RankDataError::TooFewLevels(levels.len()));
    }
    let refs: BTreeSet<&str> = levels.iter().flat_map(|(_, r)| r.ids()).collect();
    let ids: Vec<&str> = levels.iter().map(|(id, _)| *id).collect();
    let table: Vec<Vec<f64>> = refs
        .iter()
        .map(|ref_id| {
            levels
                .iter()
                .map(|(level, report)| {
                    report
                        .get(ref_id)
                        .ok_or_else(|| RankDataError::MissingScore {
                            ref_id: ref_id.to_string(),
                            level: level.to_string(),
                        })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut out = Labeling::default();
    match strategy {
        LabelStrategy::MetricRank => {
            for (ref_id, scores) in refs.iter().zip(&table) {
                for (level, label) in ids.iter().zip(order_labels(scores)) {
                    out.labels
                        .insert((ref_id.to_string(), level.to_string()), label);
                }
                let ties = tie_groups(ref_id, &ids, scores);
                for t in &ties {
                    log::info!("tie on {ref_id} between {:?} at {}", t.levels, t.score);
                }
                out.ties.extend(ties);
            }
        }
        LabelStrategy::ModelClassification | LabelStrategy::Ordinal => {
            let n = table.len().max(1) as f64;
            let means: Vec<f64> = (0..ids.len())
                .map(|l| table.iter().map(|row| row[l]).sum::<f64>() / n)
                .collect();
            let fixed = order_labels(&means);
            for ref_id in &refs {
                for (level, &label) in ids.iter().zip(&fixed) {
                    out.labels
                        .insert((ref_id.to_string(), level.to_string()), label);
                }
            }
        }
    }
    Ok(out)
}
