use ranksr_metrics::{Polarity, ScoreReport};
use serde::{Deserialize, Serialize};

use crate::{ExpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Better {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    /// Mean over images of the better score per image (metric-rank labels).
    pub ub_mr: f64,
    /// Mean score of the method with the better mean (model-classification labels).
    pub ub_mc: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Method with the lower mean; `A` on a tie.
    pub better: Better,
}

/// Best achievable mean score when a ranker trained on `a` vs `b` labels
/// steers towards the preferred method. Pairs are matched by position.
pub fn upper_bound_scores(a: &[f64], b: &[f64]) -> Result<UpperBound> {
    if a.len() != b.len() {
        return Err(ExpError::Misaligned(format!(
            "{} vs {} images",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(ExpError::Misaligned("no images".into()));
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let ub_mr = a.iter().zip(b).map(|(x, y)| x.min(*y)).sum::<f64>() / n;
    let better = if mean_b < mean_a {
        Better::B
    } else {
        Better::A
    };
    let ub_mc = mean_a.min(mean_b);
    Ok(UpperBound {
        ub_mr,
        ub_mc,
        mean_a,
        mean_b,
        better,
    })
}

/// [`upper_bound_scores`] over two LOWER_BETTER reports with identical image ids.
pub fn upper_bound(a: &ScoreReport, b: &ScoreReport) -> Result<UpperBound> {
    if a.polarity != Polarity::LowerBetter || b.polarity != Polarity::LowerBetter {
        return Err(ExpError::Polarity);
    }
    if !a.ids().eq(b.ids()) {
        let only_a: Vec<&str> = a.ids().filter(|id| b.get(id).is_none()).collect();
        let only_b: Vec<&str> = b.ids().filter(|id| a.get(id).is_none()).collect();
        return Err(ExpError::Misaligned(format!(
            "only in a: {only_a:?}; only in b: {only_b:?}"
        )));
    }
    upper_bound_scores(&a.scores(), &b.scores())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ranksr_metrics::Provenance;

    fn report(entries: &[(&str, f64)]) -> ScoreReport {
        let e = entries.iter().map(|(i, s)| (i.to_string(), *s)).collect();
        ScoreReport::new("niqe", Polarity::LowerBetter, Provenance::Internal, e).unwrap()
    }

    #[test]
    fn worked_example() {
        let ub = upper_bound(
            &report(&[("x", 2.0), ("y", 4.0)]),
            &report(&[("x", 3.0), ("y", 3.0)]),
        )
        .unwrap();
        assert_eq!((ub.ub_mr, ub.ub_mc), (2.5, 3.0));
        assert_eq!(ub.better, Better::A);
    }

    #[test]
    fn dominance_collapses_the_bounds() {
        let ub = upper_bound_scores(&[1.0, 2.0, 3.0], &[1.5, 2.0, 4.0]).unwrap();
        assert_eq!(ub.ub_mr, ub.mean_a);
        assert_eq!(ub.ub_mc, ub.mean_a);
    }

    #[test]
    fn misaligned_or_wrong_polarity() {
        let a = report(&[("x", 1.0), ("y", 2.0)]);
        assert!(matches!(
            upper_bound(&a, &report(&[("x", 1.0), ("z", 2.0)])),
            Err(ExpError::Misaligned(_))
        ));
        assert!(matches!(
            upper_bound(&a, &report(&[("x", 1.0)])),
            Err(ExpError::Misaligned(_))
        ));
        let mut hb = a.clone();
        hb.polarity = Polarity::HigherBetter;
        assert!(matches!(upper_bound(&a, &hb), Err(ExpError::Polarity)));
    }
}
