use crate::{MetricError, Result};

/// 1-based ranks with ties sharing the mean of the positions they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Spearman rank-order correlation, `1 - 6 sum d^2 / (N (N^2 - 1))` over
/// average ranks.
pub fn srocc(labels: &[f64], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(MetricError::LengthMismatch(labels.len(), scores.len()));
    }
    let n = labels.len();
    if n < 2 {
        return Err(MetricError::TooFew { need: 2, got: n });
    }
    if labels.iter().chain(scores).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let (ra, rb) = (average_ranks(labels), average_ranks(scores));
    let d2: f64 = ra.iter().zip(&rb).map(|(a, b)| (a - b) * (a - b)).sum();
    let n = n as f64;
    Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}
