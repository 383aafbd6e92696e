use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ranksr_nn::{digest, he_init, Checkpoint, Float, Module, Param, Sequential, Tensor};
use serde::{Deserialize, Serialize};

use crate::Result;

const MEAN: [f64; 3] = [0.485, 0.456, 0.406];
const STD: [f64; 3] = [0.229, 0.224, 0.225];
const BLOCKS: [(usize, usize); 5] = [(64, 2), (128, 2), (256, 4), (512, 4), (512, 4)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tap {
    /// Second convolution of the second block.
    Low,
    /// Fourth convolution of the fifth block, before pooling.
    #[default]
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractorConfig {
    pub tap: Tap,
    /// Tap the convolution output instead of its ReLU.
    pub pre_activation: bool,
    /// Divides every VGG-19 width; 1 is the standard network.
    pub width_divisor: usize,
    /// Seed for the fixed random weights used when `weights` is absent.
    pub seed: u64,
    /// Safetensors file with `features.<i>.weight` and `features.<i>.bias`
    /// in the torchvision layer numbering.
    pub weights: Option<PathBuf>,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            tap: Tap::High,
            pre_activation: false,
            width_divisor: 1,
            seed: 0,
            weights: None,
        }
    }
}

/// Frozen VGG-19 feature stack truncated at the tap layer, applied to
/// ImageNet-normalized RGB input.
#[derive(Debug, Clone)]
pub struct FeatureExtractor<F> {
    pub config: ExtractorConfig,
    pub net: Sequential<F>,
}

impl<F: Float> FeatureExtractor<F> {
    pub fn new(config: ExtractorConfig) -> Result<Self> {
        let mut net = Sequential::new();
        let (tap_block, tap_conv) = match config.tap {
            Tap::Low => (1, 1),
            Tap::High => (4, 3),
        };
        let div = config.width_divisor.max(1);
        let mut cin = 3;
        'outer: for (b, &(width, convs)) in BLOCKS.iter().enumerate() {
            let c = (width / div).max(1);
            for k in 0..convs {
                net.conv(cin, c, 3, 1, 1);
                cin = c;
                if (b, k) == (tap_block, tap_conv) {
                    if !config.pre_activation {
                        net.lrelu(0.0);
                    }
                    break 'outer;
                }
                net.lrelu(0.0);
            }
            net.maxpool();
        }
        match &config.weights {
            Some(path) => Checkpoint::load(path)?.load_module("features", &mut net)?,
            None => he_init(
                &mut net,
                0.0,
                1.0,
                &mut ChaCha8Rng::seed_from_u64(config.seed),
            ),
        }
        net.freeze();
        Ok(Self { config, net })
    }

    /// Spatial downsampling factor at the tap.
    pub fn stride(&self) -> usize {
        match self.config.tap {
            Tap::Low => 2,
            Tap::High => 16,
        }
    }

    fn normalize(x: &Tensor<F>) -> Tensor<F> {
        let mut y = x.clone();
        let plane = x.h * x.w;
        for i in 0..x.n {
            for (c, chunk) in y.item_mut(i).chunks_mut(plane).enumerate() {
                let (m, s) = (F::of(MEAN[c % 3]), F::of(STD[c % 3]));
                chunk.iter_mut().for_each(|v| *v = (*v - m) / s);
            }
        }
        y
    }

    pub fn features(&self, x: &Tensor<F>) -> Tensor<F> {
        self.net.infer(Self::normalize(x))
    }

    pub fn digest(&self) -> String {
        digest(&self.net)
    }
}

impl<F: Float> Module<F> for FeatureExtractor<F> {
    fn forward(&mut self, x: Tensor<F>, train: bool) -> Tensor<F> {
        self.net.forward(Self::normalize(&x), train)
    }

    fn infer(&self, x: Tensor<F>) -> Tensor<F> {
        self.features(&x)
    }

    fn backward(&mut self, dy: Tensor<F>) -> Tensor<F> {
        let mut dx = self.net.backward(dy);
        let plane = dx.h * dx.w;
        for i in 0..dx.n {
            for (c, chunk) in dx.item_mut(i).chunks_mut(plane).enumerate() {
                let s = F::of(STD[c % 3]);
                chunk.iter_mut().for_each(|v| *v /= s);
            }
        }
        dx
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        self.net.visit_mut(prefix, f)
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<F>)) {
        self.net.visit(prefix, f)
    }
}
