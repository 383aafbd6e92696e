use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{MetricError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Polarity {
    LowerBetter,
    HigherBetter,
}

/// Affine map `scale * x + offset`; `scale != 0` keeps it monotone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub scale: f64,
    pub offset: f64,
}

impl Transform {
    pub fn apply(&self, x: f64) -> f64 {
        self.scale * x + self.offset
    }
}

/// A metric's identity and how to bring its raw values to lower-is-better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub id: String,
    pub polarity: Polarity,
    pub transform: Option<Transform>,
}

impl MetricSpec {
    /// Validates that the transform, if any, yields lower-is-better values.
    pub fn new(
        id: impl Into<String>,
        polarity: Polarity,
        transform: Option<Transform>,
    ) -> Result<Self> {
        if let Some(t) = transform {
            let flips = t.scale < 0.0;
            let wants_flip = polarity == Polarity::HigherBetter;
            if !(t.scale.is_finite() && t.offset.is_finite())
                || t.scale == 0.0
                || flips != wants_flip
            {
                return Err(MetricError::Degenerate(
                    "transform must map to lower-is-better",
                ));
            }
        }
        Ok(Self {
            id: id.into(),
            polarity,
            transform,
        })
    }

    pub fn niqe() -> Self {
        Self::new("niqe", Polarity::LowerBetter, None).unwrap()
    }

    pub fn rmse() -> Self {
        Self::new("rmse", Polarity::LowerBetter, None).unwrap()
    }

    /// Ma is stored as `10 - Ma`.
    pub fn ma() -> Self {
        Self::new(
            "ma",
            Polarity::HigherBetter,
            Some(Transform {
                scale: -1.0,
                offset: 10.0,
            }),
        )
        .unwrap()
    }

    pub fn pi() -> Self {
        Self::new("pi", Polarity::LowerBetter, None).unwrap()
    }

    /// Maps a raw value to the lower-is-better scale used by all ranking code.
    pub fn normalize(&self, raw: f64) -> f64 {
        match (self.transform, self.polarity) {
            (Some(t), _) => t.apply(raw),
            (None, Polarity::LowerBetter) => raw,
            (None, Polarity::HigherBetter) => -raw,
        }
    }
}

/// Perceptual index `((10 - Ma) + NIQE) / 2`.
pub fn pi(niqe_score: f64, ma_score: f64) -> Result<f64> {
    if !(niqe_score.is_finite() && ma_score.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    Ok(0.5 * ((10.0 - ma_score) + niqe_score))
}

/// `sum w_i * s_i` over lower-is-better scores keyed by metric id.
pub fn fused_score(weights: &[(String, f64)], scores: &HashMap<String, f64>) -> Result<f64> {
    let mut total = 0.0;
    for (id, w) in weights {
        let s = scores
            .get(id)
            .ok_or_else(|| MetricError::MissingMetric(id.clone()))?;
        total += w * s;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn w(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn pi_values() {
        assert_eq!(pi(5.0, 5.0).unwrap(), 5.0);
        assert_eq!(pi(0.0, 10.0).unwrap(), 0.0);
        assert!(pi(f64::NAN, 1.0).is_err());
        // NIQE 2.56 with PI 1.98 implies Ma = 10 - (2 * 1.98 - 2.56)
        let ma: f64 = 10.0 - (2.0 * 1.98 - 2.56);
        assert!((ma - 8.60).abs() < 1e-9);
        assert!((pi(2.56, ma).unwrap() - 1.98).abs() < 1e-12);
    }

    #[test]
    fn fusion_values() {
        let s = table(&[("niqe", 2.5), ("rmse", 10.0)]);
        assert_eq!(
            fused_score(&w(&[("niqe", 1.0), ("rmse", 0.4)]), &s).unwrap(),
            6.5
        );
        assert_eq!(fused_score(&w(&[("niqe", 1.0)]), &s).unwrap(), 2.5);
        assert!(matches!(
            fused_score(&w(&[("ma", 1.0)]), &s),
            Err(MetricError::MissingMetric(id)) if id == "ma"
        ));
    }

    #[test]
    fn pi_as_fusion() {
        let (niqe, ma) = (3.1, 7.4);
        let s = table(&[("niqe", niqe), ("ma", MetricSpec::ma().normalize(ma))]);
        let fused = fused_score(&w(&[("niqe", 0.5), ("ma", 0.5)]), &s).unwrap();
        assert!((fused - pi(niqe, ma).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        assert_eq!(MetricSpec::ma().normalize(8.0), 2.0);
        assert_eq!(MetricSpec::niqe().normalize(4.0), 4.0);
        let psnr = MetricSpec::new("psnr", Polarity::HigherBetter, None).unwrap();
        assert_eq!(psnr.normalize(30.0), -30.0);
        let wrong = Transform {
            scale: 1.0,
            offset: 0.0,
        };
        assert!(MetricSpec::new("ma", Polarity::HigherBetter, Some(wrong)).is_err());
        let flat = Transform {
            scale: 0.0,
            offset: 1.0,
        };
        assert!(MetricSpec::new("x", Polarity::LowerBetter, Some(flat)).is_err());
    }

    proptest! {
        #[test]
        fn pi_is_affine(n in -50f64..50.0, m in -50f64..50.0, d in -10f64..10.0) {
            let a = pi(n + d, m).unwrap() - pi(n, m).unwrap();
            prop_assert!((a - d / 2.0).abs() <= 1e-12 * (1.0 + n.abs() + d.abs() + m.abs()));
        }

        #[test]
        fn fusion_linear_in_weight(a in -5f64..5.0, b in -5f64..5.0, wa in 0f64..3.0, wb in 0f64..3.0, k in 0f64..4.0) {
            let s = table(&[("x", a), ("y", b)]);
            let base = fused_score(&w(&[("x", wa), ("y", wb)]), &s).unwrap();
            let scaled = fused_score(&w(&[("x", wa * k), ("y", wb)]), &s).unwrap();
            prop_assert!((scaled - (base + (k - 1.0) * wa * a)).abs() < 1e-9);
        }
    }
}
