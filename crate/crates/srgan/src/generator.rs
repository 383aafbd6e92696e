use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ranksr_core::Image;
use ranksr_nn::{
    he_init, upsample_bilinear, upsample_bilinear_backward, Float, Module, Param, Sequential,
    Tensor,
};
use serde::{Deserialize, Serialize};

use crate::{Result, SrError};

pub const SCALE: usize = 4;
/// Smallest low-resolution side accepted by the image-level API.
pub const MIN_LR_SIDE: usize = 16;
const SLOPE: f64 = 0.1;

/// Residual generator without batch normalization: a head convolution,
/// `residual_blocks` conv-ReLU-conv blocks with identity skips, two ×2
/// sub-pixel stages and two output convolutions, plus a bilinear ×4 skip of
/// the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub residual_blocks: usize,
    pub base_channels: usize,
    pub in_channels: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            residual_blocks: 16,
            base_channels: 64,
            in_channels: 3,
        }
    }
}

impl GeneratorConfig {
    pub fn new(residual_blocks: usize, base_channels: usize) -> Self {
        Self {
            residual_blocks,
            base_channels,
            ..Self::default()
        }
    }

    /// Low-resolution pixels on each side that influence an output pixel.
    pub fn receptive_radius(&self) -> usize {
        // head, two per block, first upsampling conv; the later convs run at
        // ×2 and ×4 and add at most one more low-resolution pixel
        1 + 2 * self.residual_blocks + 1 + 1
    }
}

#[derive(Debug, Clone)]
pub struct Generator<F> {
    pub config: GeneratorConfig,
    head: Sequential<F>,
    blocks: Vec<Sequential<F>>,
    tail: Sequential<F>,
    input_hw: Option<(usize, usize)>,
}

impl<F: Float> Generator<F> {
    /// Weights drawn from `seed`, He-normal scaled by 0.1.
    pub fn new(config: GeneratorConfig, seed: u64) -> Self {
        let (nf, c) = (config.base_channels, config.in_channels);
        let mut head = Sequential::new();
        head.conv(c, nf, 3, 1, 1).lrelu(SLOPE);
        let blocks = (0..config.residual_blocks)
            .map(|_| {
                let mut b = Sequential::new();
                b.conv(nf, nf, 3, 1, 1).lrelu(0.0).conv(nf, nf, 3, 1, 1);
                b
            })
            .collect();
        let mut tail = Sequential::new();
        for _ in 0..2 {
            tail.conv(nf, 4 * nf, 3, 1, 1).shuffle(2).lrelu(SLOPE);
        }
        tail.conv(nf, nf, 3, 1, 1).lrelu(SLOPE).conv(nf, c, 3, 1, 1);
        let mut g = Self {
            config,
            head,
            blocks,
            tail,
            input_hw: None,
        };
        he_init(&mut g, 0.0, 0.1, &mut ChaCha8Rng::seed_from_u64(seed));
        g
    }

    fn check(&self, img: &Image) -> Result<()> {
        if img.height() < MIN_LR_SIDE || img.width() < MIN_LR_SIDE {
            return Err(SrError::Undersized {
                height: img.height(),
                width: img.width(),
                min: MIN_LR_SIDE,
            });
        }
        if img.channels() != self.config.in_channels {
            return Err(SrError::Channels {
                got: img.channels(),
                expected: self.config.in_channels,
            });
        }
        Ok(())
    }

    /// Raw output for a low-resolution tensor, unclamped.
    pub fn infer_tensor(&self, x: &Tensor<F>) -> Tensor<F> {
        let skip = upsample_bilinear(x, SCALE);
        let mut t = self.head.infer(x.clone());
        for b in &self.blocks {
            let r = b.infer(t.clone());
            t.add_assign(&r);
        }
        let mut y = self.tail.infer(t);
        y.add_assign(&skip);
        y
    }
}

impl Generator<f32> {
    /// Super-resolves one image in evaluation mode, clamping into `[0, 1]`.
    pub fn super_resolve(&self, lr: &Image) -> Result<Image> {
        self.check(lr)?;
        Ok(self.infer_tensor(&Tensor::from_image(lr)).to_image(0))
    }
}

/// `G(lr)` for an image: each side grows ×4 and values are clamped.
pub fn generator_forward(g: &Generator<f32>, lr: &Image) -> Result<Image> {
    g.super_resolve(lr)
}

impl<F: Float> Module<F> for Generator<F> {
    fn forward(&mut self, x: Tensor<F>, train: bool) -> Tensor<F> {
        self.input_hw = Some((x.h, x.w));
        let skip = upsample_bilinear(&x, SCALE);
        let mut t = self.head.forward(x, train);
        for b in &mut self.blocks {
            let r = b.forward(t.clone(), train);
            t.add_assign(&r);
        }
        let mut y = self.tail.forward(t, train);
        y.add_assign(&skip);
        y
    }

    fn infer(&self, x: Tensor<F>) -> Tensor<F> {
        self.infer_tensor(&x)
    }

    fn backward(&mut self, dy: Tensor<F>) -> Tensor<F> {
        let (h, w) = self.input_hw.expect("backward before forward");
        let dskip = upsample_bilinear_backward(&dy, SCALE, h, w);
        let mut dt = self.tail.backward(dy);
        for b in self.blocks.iter_mut().rev() {
            let dr = b.backward(dt.clone());
            dt.add_assign(&dr);
        }
        let mut dx = self.head.backward(dt);
        dx.add_assign(&dskip);
        dx
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        let p = |s: &str| {
            if prefix.is_empty() {
                s.to_string()
            } else {
                format!("{prefix}.{s}")
            }
        };
        self.head.visit_mut(&p("head"), f);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit_mut(&p(&format!("blocks.{i}")), f);
        }
        self.tail.visit_mut(&p("tail"), f);
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<F>)) {
        let p = |s: &str| {
            if prefix.is_empty() {
                s.to_string()
            } else {
                format!("{prefix}.{s}")
            }
        };
        self.head.visit(&p("head"), f);
        for (i, b) in self.blocks.iter().enumerate() {
            b.visit(&p(&format!("blocks.{i}")), f);
        }
        self.tail.visit(&p("tail"), f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ranksr_core::synthetic::dead_leaves;

    #[test]
    fn output_is_four_times_larger_and_clamped() {
        let g = Generator::<f32>::new(GeneratorConfig::new(2, 8), 1);
        let sr = generator_forward(&g, &dead_leaves(33, 47, 3)).unwrap();
        assert_eq!((sr.height(), sr.width()), (132, 188));
        assert!(sr.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(matches!(
            g.super_resolve(&dead_leaves(15, 40, 3)),
            Err(SrError::Undersized { .. })
        ));
    }

    #[test]
    fn forward_matches_infer() {
        let mut g = Generator::<f64>::new(GeneratorConfig::new(1, 4), 2);
        let x = Tensor::from_image(&dead_leaves(8, 6, 1));
        assert_eq!(g.forward(x.clone(), true).data, g.infer(x).data);
    }
}
