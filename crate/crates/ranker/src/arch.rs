use serde::{Deserialize, Serialize};

use ranksr_nn::{Float, Module, Sequential};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Vgg8,
    Vgg12,
    Vgg16,
}

impl Arch {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "vgg8" => Some(Self::Vgg8),
            "vgg12" => Some(Self::Vgg12),
            "vgg16" => Some(Self::Vgg16),
            _ => None,
        }
    }

    /// Stage widths as multiples of the base channel count.
    fn multipliers(self) -> &'static [usize] {
        match self {
            Self::Vgg8 => &[2, 4, 8],
            Self::Vgg12 | Self::Vgg16 => &[1, 2, 4, 8, 8],
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Vgg8 => "vgg8",
            Self::Vgg12 => "vgg12",
            Self::Vgg16 => "vgg16",
        })
    }
}

/// Each stage is a 3×3 convolution followed by a 4×4 stride-2 convolution
/// (VGG-16 adds a second 3×3 convolution to every stage but the first);
/// batch normalization follows every convolution except the very first, and
/// every convolution is followed by a leaky ReLU. Global average pooling
/// feeds a `hidden`-unit fully connected layer and a scalar output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankerConfig {
    pub arch: Arch,
    pub base_channels: usize,
    pub leaky_slope: f64,
    pub hidden: usize,
    pub in_channels: usize,
}

impl Default for RankerConfig {
    fn default() -> Self {
        Self {
            arch: Arch::Vgg12,
            base_channels: 64,
            leaky_slope: 0.2,
            hidden: 100,
            in_channels: 3,
        }
    }
}

impl RankerConfig {
    pub fn new(arch: Arch, base_channels: usize) -> Self {
        Self {
            arch,
            base_channels,
            ..Self::default()
        }
    }

    pub fn stage_widths(&self) -> Vec<usize> {
        self.arch
            .multipliers()
            .iter()
            .map(|m| m * self.base_channels)
            .collect()
    }

    /// Number of convolution layers.
    pub fn conv_layers(&self) -> usize {
        let stages = self.arch.multipliers().len();
        let extra = if self.arch == Arch::Vgg16 {
            stages - 1
        } else {
            0
        };
        2 * stages + extra
    }

    /// Smallest square input side each stride-2 stage can still halve.
    pub fn min_size(&self) -> usize {
        1 << self.arch.multipliers().len()
    }

    pub fn build<F: Float>(&self) -> Sequential<F> {
        let mut net = Sequential::new();
        let slope = self.leaky_slope;
        let mut cin = self.in_channels;
        for (s, &c) in self.stage_widths().iter().enumerate() {
            net.conv(cin, c, 3, 1, 1);
            if s > 0 {
                net.norm(c);
            }
            net.lrelu(slope);
            if self.arch == Arch::Vgg16 && s > 0 {
                net.conv(c, c, 3, 1, 1).norm(c).lrelu(slope);
            }
            net.conv(c, c, 4, 2, 1).norm(c).lrelu(slope);
            cin = c;
        }
        net.gap()
            .linear(cin, self.hidden)
            .lrelu(slope)
            .linear(self.hidden, 1);
        net
    }

    pub fn param_count(&self) -> usize {
        self.build::<f32>().param_count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_counts_match_depth_names() {
        for (arch, convs) in [(Arch::Vgg8, 6), (Arch::Vgg12, 10), (Arch::Vgg16, 14)] {
            let c = RankerConfig::new(arch, 8);
            assert_eq!(c.conv_layers(), convs);
            let n = c
                .build::<f32>()
                .layers
                .iter()
                .filter(|l| matches!(l, ranksr_nn::Layer::Conv(_)))
                .count();
            assert_eq!(n, convs);
        }
        assert_eq!(Arch::parse("VGG-12"), Some(Arch::Vgg12));
        assert_eq!(Arch::parse("resnet"), None);
    }

    #[test]
    fn parameter_counts_track_published_sizes() {
        // thousands of parameters for VGG-8 / 12 / 16
        for (arch, published) in [
            (Arch::Vgg8, 7_069.0),
            (Arch::Vgg12, 13_734.0),
            (Arch::Vgg16, 19_194.0),
        ] {
            let k = RankerConfig::new(arch, 64).param_count() as f64 / 1e3;
            assert!(
                (k - published).abs() / published < 0.10,
                "{arch}: {k}K vs {published}K"
            );
        }
    }
}
