use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ranksr_nn::{he_init, Float, Module, Param, Sequential, Tensor};
use serde::{Deserialize, Serialize};

/// Probabilities are kept this far from 0 and 1.
pub const PROB_CLAMP: f64 = 1e-15;

/// Ten convolutions alternating 3×3 stride 1 and 4×4 stride 2, widths
/// `nf, nf, 2nf, 2nf, 4nf, 4nf, 8nf, 8nf, 8nf, 8nf`, batch normalization on
/// all but the first, leaky ReLU after each; global average pooling feeds a
/// `hidden`-unit layer and a single logit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscriminatorConfig {
    pub base_channels: usize,
    pub in_channels: usize,
    pub hidden: usize,
    pub leaky_slope: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            base_channels: 64,
            in_channels: 3,
            hidden: 100,
            leaky_slope: 0.2,
        }
    }
}

impl DiscriminatorConfig {
    pub const CONV_LAYERS: usize = 10;

    pub fn new(base_channels: usize) -> Self {
        Self {
            base_channels,
            ..Self::default()
        }
    }

    pub fn widths(&self) -> [usize; 10] {
        let b = self.base_channels;
        [b, b, 2 * b, 2 * b, 4 * b, 4 * b, 8 * b, 8 * b, 8 * b, 8 * b]
    }

    /// Smallest input side that survives the five stride-2 convolutions.
    pub fn min_size(&self) -> usize {
        32
    }
}

#[derive(Debug, Clone)]
pub struct Discriminator<F> {
    pub config: DiscriminatorConfig,
    pub net: Sequential<F>,
}

impl<F: Float> Discriminator<F> {
    pub fn new(config: DiscriminatorConfig, seed: u64) -> Self {
        let mut net = Sequential::new();
        let mut cin = config.in_channels;
        for (i, &c) in config.widths().iter().enumerate() {
            if i % 2 == 0 {
                net.conv(cin, c, 3, 1, 1);
            } else {
                net.conv(cin, c, 4, 2, 1);
            }
            if i > 0 {
                net.norm(c);
            }
            net.lrelu(config.leaky_slope);
            cin = c;
        }
        net.gap()
            .linear(cin, config.hidden)
            .lrelu(config.leaky_slope)
            .linear(config.hidden, 1);
        he_init(
            &mut net,
            config.leaky_slope,
            1.0,
            &mut ChaCha8Rng::seed_from_u64(seed),
        );
        Self { config, net }
    }

    /// Evaluation-mode probability that each batch item is real.
    pub fn prob(&self, x: &Tensor<F>) -> Vec<f64> {
        self.net
            .infer(x.clone())
            .data
            .iter()
            .map(|l| prob_from_logit(l.f64()))
            .collect()
    }
}

/// Logistic output clamped into `(0, 1)`.
pub fn prob_from_logit(l: f64) -> f64 {
    let p = if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        l.exp() / (1.0 + l.exp())
    };
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

impl<F: Float> Module<F> for Discriminator<F> {
    fn forward(&mut self, x: Tensor<F>, train: bool) -> Tensor<F> {
        self.net.forward(x, train)
    }

    fn infer(&self, x: Tensor<F>) -> Tensor<F> {
        self.net.infer(x)
    }

    fn backward(&mut self, dy: Tensor<F>) -> Tensor<F> {
        self.net.backward(dy)
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        self.net.visit_mut(prefix, f)
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<F>)) {
        self.net.visit(prefix, f)
    }
}
