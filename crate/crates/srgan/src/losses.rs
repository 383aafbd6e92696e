use ranksr_core::Image;
use ranksr_nn::{Float, Module, Sequential, Tensor};
use ranksr_ranker::RankerModel;
use serde::{Deserialize, Serialize};

use crate::discriminator::PROB_CLAMP;
use crate::{Discriminator, FeatureExtractor, Result, SrError};

/// Inputs to the exponential monotone function are clamped here.
pub const EXP_CLAMP: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotone {
    #[default]
    Sigmoid,
    Exp,
    Identity,
}

impl Monotone {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Some(Self::Sigmoid),
            "exp" | "exponential" => Some(Self::Exp),
            "identity" | "id" => Some(Self::Identity),
            _ => None,
        }
    }

    pub fn apply(self, s: f64) -> f64 {
        match self {
            Self::Sigmoid => sigmoid(s),
            Self::Exp => s.min(EXP_CLAMP).exp(),
            Self::Identity => s,
        }
    }

    pub fn derivative(self, s: f64) -> f64 {
        match self {
            Self::Sigmoid => sigmoid(s) * sigmoid(-s),
            Self::Exp if s > EXP_CLAMP => 0.0,
            Self::Exp => s.exp(),
            Self::Identity => 1.0,
        }
    }
}

impl std::fmt::Display for Monotone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sigmoid => "sigmoid",
            Self::Exp => "exp",
            Self::Identity => "identity",
        })
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub perceptual: f64,
    pub adversarial: f64,
    pub rank: f64,
    pub mse: f64,
    /// One weight per ranker; empty means `1 / K` each.
    pub ranker_weights: Vec<f64>,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            perceptual: 1.0,
            adversarial: 0.005,
            rank: 0.03,
            mse: 0.0,
            ranker_weights: Vec::new(),
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.perceptual, self.adversarial, self.rank, self.mse];
        if all
            .iter()
            .chain(&self.ranker_weights)
            .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            return Err(SrError::Config(
                "loss weights must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Per-ranker weights for `k` rankers.
    pub fn resolve_ranker_weights(&self, k: usize) -> Result<Vec<f64>> {
        if self.ranker_weights.is_empty() {
            return Ok(vec![1.0 / k.max(1) as f64; k]);
        }
        if self.ranker_weights.len() != k {
            return Err(SrError::Config(format!(
                "{} ranker weights for {k} rankers",
                self.ranker_weights.len()
            )));
        }
        Ok(self.ranker_weights.clone())
    }
}

/// Unweighted loss terms of one batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub perceptual: f64,
    pub adversarial: f64,
    pub rank: f64,
    pub mse: f64,
}

pub fn total_generator_loss(w: &LossWeights, p: &LossParts) -> f64 {
    w.perceptual * p.perceptual + w.adversarial * p.adversarial + w.rank * p.rank + w.mse * p.mse
}

fn check_shapes<F: Float>(a: &Tensor<F>, b: &Tensor<F>) {
    assert!(
        a.same_shape(b),
        "loss operands differ in shape: {:?} vs {:?}",
        a.shape(),
        b.shape()
    );
}

fn image_shapes(a: &Image, b: &Image) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(SrError::ShapeMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Mean squared pixel error and its gradient with respect to `sr`.
pub fn mse_loss<F: Float>(sr: &Tensor<F>, hr: &Tensor<F>) -> (f64, Tensor<F>) {
    check_shapes(sr, hr);
    let n = sr.len() as f64;
    let mut grad = sr.clone();
    let mut loss = 0.0;
    for (g, h) in grad.data.iter_mut().zip(&hr.data) {
        let d = g.f64() - h.f64();
        loss += d * d;
        *g = F::of(2.0 * d / n);
    }
    (loss / n, grad)
}

/// Mean squared distance between tap features, with the gradient with
/// respect to `sr`.
pub fn perceptual_loss_grad<F: Float>(
    ex: &mut FeatureExtractor<F>,
    sr: &Tensor<F>,
    hr: &Tensor<F>,
) -> (f64, Tensor<F>) {
    check_shapes(sr, hr);
    let target = ex.features(hr);
    let f = ex.forward(sr.clone(), false);
    let (loss, df) = mse_loss(&f, &target);
    (loss, ex.backward(df))
}

/// Image-level perceptual loss.
pub fn perceptual_loss(ex: &FeatureExtractor<f32>, sr: &Image, hr: &Image) -> Result<f64> {
    image_shapes(sr, hr)?;
    let (a, b) = (
        ex.features(&Tensor::from_image(sr)),
        ex.features(&Tensor::from_image(hr)),
    );
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| ((x - y) as f64).powi(2))
        .sum::<f64>()
        / a.len() as f64)
}

/// Largest logit magnitude consistent with the probability clamp.
fn logit_clamp() -> f64 {
    ((1.0 - PROB_CLAMP) / PROB_CLAMP).ln()
}

/// `-ln D` for a logit.
fn neg_log_real(l: f64) -> f64 {
    softplus(-l.clamp(-logit_clamp(), logit_clamp()))
}

/// `-ln (1 - D)` for a logit.
fn neg_log_fake(l: f64) -> f64 {
    softplus(l.clamp(-logit_clamp(), logit_clamp()))
}

/// `-[ln D(hr) + ln(1 - D(sr))]` from probabilities.
pub fn d_loss_from_probs(p_real: f64, p_fake: f64) -> f64 {
    let c = |p: f64| p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -(c(p_real).ln() + (1.0 - c(p_fake)).ln())
}

/// `-ln D(sr)` from a probability.
pub fn g_loss_from_prob(p_fake: f64) -> f64 {
    -p_fake.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln()
}

/// Evaluation-mode `(d_loss, g_loss)` for one image pair.
pub fn adversarial_losses(d: &Discriminator<f32>, sr: &Image, hr: &Image) -> Result<(f64, f64)> {
    image_shapes(sr, hr)?;
    let min = d.config.min_size();
    if sr.height() < min || sr.width() < min {
        return Err(SrError::Undersized {
            height: sr.height(),
            width: sr.width(),
            min,
        });
    }
    let lf = d.infer(Tensor::from_image(sr)).data[0] as f64;
    let lr = d.infer(Tensor::from_image(hr)).data[0] as f64;
    Ok((neg_log_real(lr) + neg_log_fake(lf), neg_log_real(lf)))
}

fn logit_grad(l: f64, real: bool) -> f64 {
    if l.abs() > logit_clamp() {
        return 0.0;
    }
    if real {
        -sigmoid(-l)
    } else {
        sigmoid(l)
    }
}

/// Generator adversarial loss `mean(-ln D(sr))` and its gradient with
/// respect to `sr`. Discriminator parameter gradients accumulate as a side
/// effect and should be cleared before its own update.
pub fn adversarial_g_grad<F: Float>(
    d: &mut Discriminator<F>,
    sr: &Tensor<F>,
    train: bool,
) -> (f64, Tensor<F>) {
    let logits: Vec<f64> = d
        .forward(sr.clone(), train)
        .data
        .iter()
        .map(|v| v.f64())
        .collect();
    let n = logits.len() as f64;
    let loss = logits.iter().map(|&l| neg_log_real(l)).sum::<f64>() / n;
    let dl = logits
        .iter()
        .map(|&l| F::of(logit_grad(l, true) / n))
        .collect();
    (
        loss,
        d.backward(Tensor::from_vec(logits.len(), 1, 1, 1, dl)),
    )
}

/// Accumulates discriminator gradients of
/// `mean(-ln D(real)) + mean(-ln(1 - D(fake)))` and returns that loss.
pub fn discriminator_backward<F: Float>(
    d: &mut Discriminator<F>,
    real: &Tensor<F>,
    fake: &Tensor<F>,
) -> f64 {
    let mut total = 0.0;
    for (x, is_real) in [(real, true), (fake, false)] {
        let logits: Vec<f64> = d
            .forward(x.clone(), true)
            .data
            .iter()
            .map(|v| v.f64())
            .collect();
        let n = logits.len() as f64;
        let term = if is_real { neg_log_real } else { neg_log_fake };
        total += logits.iter().map(|&l| term(l)).sum::<f64>() / n;
        let dl = logits
            .iter()
            .map(|&l| F::of(logit_grad(l, is_real) / n))
            .collect();
        d.backward(Tensor::from_vec(logits.len(), 1, 1, 1, dl));
    }
    total
}

/// `Σ_k w_k · mean_b f(R_k(sr_b))` through frozen ranker networks, with the
/// gradient with respect to `sr`.
pub fn rank_content_grad<F: Float>(
    rankers: &mut [(&mut Sequential<F>, f64)],
    sr: &Tensor<F>,
    f: Monotone,
) -> (f64, Tensor<F>) {
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(sr.n, sr.c, sr.h, sr.w);
    for (net, w) in rankers.iter_mut() {
        let s: Vec<f64> = net
            .forward(sr.clone(), false)
            .data
            .iter()
            .map(|v| v.f64())
            .collect();
        let n = s.len() as f64;
        loss += *w * s.iter().map(|&v| f.apply(v)).sum::<f64>() / n;
        let ds = s.iter().map(|&v| F::of(*w * f.derivative(v) / n)).collect();
        grad.add_assign(&net.backward(Tensor::from_vec(s.len(), 1, 1, 1, ds)));
    }
    (loss, grad)
}

/// Image-level rank-content loss `Σ_k w_k · f(R_k(sr))`.
pub fn rank_content_loss(
    rankers: &[RankerModel],
    weights: &[f64],
    sr: &Image,
    f: Monotone,
) -> Result<f64> {
    if rankers.is_empty() || rankers.len() != weights.len() {
        return Err(SrError::Config(format!(
            "{} rankers with {} weights",
            rankers.len(),
            weights.len()
        )));
    }
    let mut total = 0.0;
    for (r, w) in rankers.iter().zip(weights) {
        total += w * f.apply(r.score(sr)?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_adversarial_values() {
        assert!((g_loss_from_prob(0.5) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(g_loss_from_prob(0.3) > g_loss_from_prob(0.6));
        let mut prev = f64::INFINITY;
        for delta in [1e-1, 1e-3, 1e-6, 1e-9] {
            let l = d_loss_from_probs(1.0 - delta, delta);
            assert!(l < prev);
            prev = l;
        }
        assert!(prev < 1e-8);
        assert!((neg_log_real(0.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((neg_log_real(1.3) - g_loss_from_prob(sigmoid(1.3))).abs() < 1e-12);
        assert!((neg_log_fake(-0.4) + (1.0 - sigmoid(-0.4)).ln()).abs() < 1e-12);
    }

    #[test]
    fn monotone_functions() {
        assert_eq!(Monotone::Sigmoid.apply(0.0), 0.5);
        assert_eq!(Monotone::Exp.apply(1e4), EXP_CLAMP.exp());
        assert_eq!(Monotone::Identity.apply(-3.5), -3.5);
        for f in [Monotone::Sigmoid, Monotone::Exp, Monotone::Identity] {
            let h = 1e-6;
            let fd = (f.apply(0.7 + h) - f.apply(0.7 - h)) / (2.0 * h);
            assert!((fd - f.derivative(0.7)).abs() < 1e-6);
            assert_eq!(Monotone::parse(&f.to_string()), Some(f));
        }
    }

    #[test]
    fn composition_and_weights() {
        let p = LossParts {
            perceptual: 2.0,
            adversarial: 1.0,
            rank: 0.5,
            mse: 4.0,
        };
        assert!(
            (total_generator_loss(&LossWeights::default(), &p) - (2.0 + 0.005 + 0.015)).abs()
                < 1e-12
        );
        let zero = LossWeights {
            perceptual: 0.0,
            adversarial: 0.0,
            rank: 0.0,
            mse: 0.0,
            ranker_weights: vec![],
        };
        assert_eq!(total_generator_loss(&zero, &p), 0.0);
        assert_eq!(
            LossWeights::default().resolve_ranker_weights(2).unwrap(),
            vec![0.5, 0.5]
        );
        assert!(LossWeights {
            ranker_weights: vec![1.0],
            ..Default::default()
        }
        .resolve_ranker_weights(2)
        .is_err());
        assert!(LossWeights {
            rank: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!((softplus(800.0) - 800.0).abs() < 1e-12 && softplus(-800.0) >= 0.0);
    }
}
