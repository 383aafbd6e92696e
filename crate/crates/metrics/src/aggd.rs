use std::sync::OnceLock;

use libm::tgamma;

use crate::{MetricError, Result};

const ALPHA_MIN: f64 = 0.2;
const ALPHA_STEP: f64 = 1e-3;
const GRID_LEN: usize = 9801;

/// Asymmetric generalized Gaussian parameters: shape and left/right scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggdParams {
    pub alpha: f64,
    pub beta_left: f64,
    pub beta_right: f64,
}

impl AggdParams {
    /// Mean of the distribution, `(br - bl) * G(2/a) / G(1/a)`.
    pub fn mean(&self) -> f64 {
        (self.beta_right - self.beta_left) * tgamma(2.0 / self.alpha) / tgamma(1.0 / self.alpha)
    }
}

fn moment_ratio(alpha: f64) -> f64 {
    let g2 = tgamma(2.0 / alpha);
    g2 * g2 / (tgamma(1.0 / alpha) * tgamma(3.0 / alpha))
}

fn grid() -> &'static [(f64, f64)] {
    static GRID: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    GRID.get_or_init(|| {
        (0..GRID_LEN)
            .map(|k| {
                let a = ALPHA_MIN + k as f64 * ALPHA_STEP;
                (a, moment_ratio(a))
            })
            .collect()
    })
}

/// Moment-matching AGGD fit; alpha is the grid point in `[0.2, 10]` whose
/// ratio `G(2/a)^2 / (G(1/a) G(3/a))` is closest to the sample estimate.
pub fn aggd_fit(samples: &[f64]) -> Result<AggdParams> {
    if samples.len() < 2 {
        return Err(MetricError::TooFew {
            need: 2,
            got: samples.len(),
        });
    }
    let (mut left_sq, mut left_n, mut right_sq, mut right_n) = (0.0, 0usize, 0.0, 0usize);
    let (mut abs_sum, mut sq_sum) = (0.0, 0.0);
    for &x in samples {
        if !x.is_finite() {
            return Err(MetricError::NonFinite);
        }
        if x < 0.0 {
            left_sq += x * x;
            left_n += 1;
        } else if x > 0.0 {
            right_sq += x * x;
            right_n += 1;
        }
        abs_sum += x.abs();
        sq_sum += x * x;
    }
    if left_n == 0 && right_n == 0 {
        return Err(MetricError::Degenerate("all samples are zero"));
    }
    if left_n == 0 || right_n == 0 {
        return Err(MetricError::Degenerate("samples lie on one side of zero"));
    }
    let n = samples.len() as f64;
    let left_std = (left_sq / left_n as f64).sqrt();
    let right_std = (right_sq / right_n as f64).sqrt();
    let g = left_std / right_std;
    let mean_abs = abs_sum / n;
    let r_hat = mean_abs * mean_abs / (sq_sum / n);
    let r_norm = r_hat * (g.powi(3) + 1.0) * (g + 1.0) / (g * g + 1.0).powi(2);

    let mut best = (f64::INFINITY, ALPHA_MIN);
    for &(a, r) in grid() {
        let d = (r - r_norm) * (r - r_norm);
        if d < best.0 {
            best = (d, a);
        }
    }
    let alpha = best.1;
    let k = (tgamma(1.0 / alpha) / tgamma(3.0 / alpha)).sqrt();
    Ok(AggdParams {
        alpha,
        beta_left: left_std * k,
        beta_right: right_std * k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp, Gamma, Normal};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Exact AGGD sampler: side chosen with probability proportional to its
    /// scale, magnitude `beta * G^(1/alpha)` with `G ~ Gamma(1/alpha, 1)`.
    fn sample_aggd(p: AggdParams, n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng(seed);
        let gamma = Gamma::new(1.0 / p.alpha, 1.0).unwrap();
        let p_left = p.beta_left / (p.beta_left + p.beta_right);
        (0..n)
            .map(|_| {
                let mag = gamma.sample(&mut r).powf(1.0 / p.alpha);
                if r.random::<f64>() < p_left {
                    -p.beta_left * mag
                } else {
                    p.beta_right * mag
                }
            })
            .collect()
    }

    #[test]
    fn grid_shape() {
        let g = grid();
        assert_eq!(g.len(), GRID_LEN);
        assert!((g[GRID_LEN - 1].0 - 10.0).abs() < 1e-9);
        // r(2) = G(1)^2 / (G(1/2) G(3/2)) = 2 / pi
        let r2 = moment_ratio(2.0);
        assert!((r2 - 2.0 / std::f64::consts::PI).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1].1 > w[0].1));
    }

    #[test]
    fn gaussian_samples() {
        let mut r = rng(11);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..200_000).map(|_| normal.sample(&mut r)).collect();
        let p = aggd_fit(&xs).unwrap();
        assert!((p.alpha - 2.0).abs() < 0.1, "{p:?}");
        assert!((p.beta_left / p.beta_right - 1.0).abs() < 0.1);
        // beta of a unit normal in this parameterization is sqrt(2)
        assert!((p.beta_left - 2f64.sqrt()).abs() < 0.05 * 2f64.sqrt());
    }

    #[test]
    fn laplacian_samples() {
        let mut r = rng(12);
        let exp = Exp::new(1.0).unwrap();
        let xs: Vec<f64> = (0..200_000)
            .map(|_| {
                let m: f64 = exp.sample(&mut r);
                if r.random::<bool>() {
                    m
                } else {
                    -m
                }
            })
            .collect();
        let p = aggd_fit(&xs).unwrap();
        assert!((p.alpha - 1.0).abs() < 0.1, "{p:?}");
        assert!((p.beta_left - 1.0).abs() < 0.1 && (p.beta_right - 1.0).abs() < 0.1);
    }

    #[test]
    fn recovers_asymmetric_parameters() {
        let cases = [
            AggdParams {
                alpha: 0.8,
                beta_left: 0.5,
                beta_right: 1.0,
            },
            AggdParams {
                alpha: 1.5,
                beta_left: 2.0,
                beta_right: 1.2,
            },
            AggdParams {
                alpha: 2.6,
                beta_left: 0.3,
                beta_right: 0.4,
            },
        ];
        for (i, truth) in cases.into_iter().enumerate() {
            let xs = sample_aggd(truth, 100_000, 100 + i as u64);
            let p = aggd_fit(&xs).unwrap();
            let rel = |a: f64, b: f64| (a - b).abs() / b;
            assert!(rel(p.alpha, truth.alpha) < 0.1, "{truth:?} -> {p:?}");
            assert!(
                rel(p.beta_left, truth.beta_left) < 0.1,
                "{truth:?} -> {p:?}"
            );
            assert!(
                rel(p.beta_right, truth.beta_right) < 0.1,
                "{truth:?} -> {p:?}"
            );
            let m: f64 = xs.iter().sum::<f64>() / xs.len() as f64;
            assert!((p.mean() - m).abs() < 0.1 * (truth.beta_left + truth.beta_right));
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            aggd_fit(&[0.0; 16]),
            Err(MetricError::Degenerate(_))
        ));
        assert!(matches!(
            aggd_fit(&[1.0, 2.0, 0.0]),
            Err(MetricError::Degenerate(_))
        ));
        assert!(matches!(aggd_fit(&[1.0]), Err(MetricError::TooFew { .. })));
        assert!(matches!(
            aggd_fit(&[1.0, f64::NAN]),
            Err(MetricError::NonFinite)
        ));
    }
}
