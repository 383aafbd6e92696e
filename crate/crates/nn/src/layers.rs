use crate::float::{gemm, Layout};
use crate::module::{join, Module, Param};
use crate::{Float, Tensor};

/// `max(x, 0) + slope * min(x, 0)`; slope 0 is a plain ReLU.
#[derive(Debug, Clone)]
pub struct LeakyRelu {
    pub slope: f64,
    mask: Vec<bool>,
}

impl LeakyRelu {
    pub fn new(slope: f64) -> Self {
        Self {
            slope,
            mask: Vec::new(),
        }
    }
}

impl<F: Float> Module<F> for LeakyRelu {
    fn forward(&mut self, x: Tensor<F>, _train: bool) -> Tensor<F> {
        self.mask = x.data.iter().map(|v| *v > F::zero()).collect();
        Module::<F>::infer(self, x)
    }

    fn infer(&self, x: Tensor<F>) -> Tensor<F> {
        let s = F::of(self.slope);
        x.map(|v| if v > F::zero() { v } else { v * s })
    }

    fn backward(&mut self, mut dy: Tensor<F>) -> Tensor<F> {
        assert_eq!(
            self.mask.len(),
            dy.len(),
            "activation backward without forward"
        );
        let s = F::of(self.slope);
        for (d, pos) in dy.data.iter_mut().zip(&self.mask) {
            if !pos {
                *d *= s;
            }
        }
        dy
    }

    fn visit_mut(&mut self, _: &str, _: &mut dyn FnMut(&str, &mut Param<F>)) {}

    fn visit(&self, _: &str, _: &mut dyn FnMut(&str, &Param<F>)) {}
}

/// Fully connected layer over the flattened `C * H * W` features of each item.
#[derive(Debug, Clone)]
pub struct Linear<F> {
    pub in_f: usize,
    pub out_f: usize,
    /// `[out_f, in_f]`
    pub weight: Param<F>,
    pub bias: Param<F>,
    cache: Option<Tensor<F>>,
}

impl<F: Float> Linear<F> {
    pub fn new(in_f: usize, out_f: usize) -> Self {
        Self {
            in_f,
            out_f,
            weight: Param::filled(vec![out_f, in_f], F::zero()),
            bias: Param::filled(vec![out_f], F::zero()),
            cache: None,
        }
    }

    fn run(&self, x: &Tensor<F>) -> Tensor<F> {
        assert_eq!(x.item_len(), self.in_f, "linear: feature mismatch");
        let mut y = Tensor::zeros(x.n, self.out_f, 1, 1);
        for i in 0..x.n {
            y.item_mut(i).copy_from_slice(&self.bias.value);
        }
        gemm(
            x.n,
            self.in_f,
            self.out_f,
            F::one(),
            &x.data,
            Layout::rows(self.in_f),
            &self.weight.value,
            Layout::trans(self.in_f),
            F::one(),
            &mut y.data,
            Layout::rows(self.out_f),
        );
        y
    }
}

impl<F: Float> Module<F> for Linear<F> {
    fn forward(&mut self, x: Tensor<F>, _train: bool) -> Tensor<F> {
        let y = self.run(&x);
        self.cache = Some(x);
        y
    }

    fn infer(&self, x: Tensor<F>) -> Tensor<F> {
        self.run(&x)
    }

    fn backward(&mut self, dy: Tensor<F>) -> Tensor<F> {
        let x = self.cache.take().expect("linear backward without forward");
        if self.weight.trains() {
            gemm(
                self.out_f,
                x.n,
                self.in_f,
                F::one(),
                &dy.data,
                Layout::trans(self.out_f),
                &x.data,
                Layout::rows(self.in_f),
                F::one(),
                &mut self.weight.grad,
                Layout::rows(self.in_f),
            );
        }
        if self.bias.trains() {
            for i in 0..dy.n {
                for (g, d) in self.bias.grad.iter_mut().zip(dy.item(i)) {
                    *g += *d;
                }
            }
        }
        let mut dx = Tensor::zeros(x.n, x.c, x.h, x.w);
        gemm(
            x.n,
            self.out_f,
            self.in_f,
            F::one(),
            &dy.data,
            Layout::rows(self.out_f),
            &self.weight.value,
            Layout::rows(self.in_f),
            F::zero(),
            &mut dx.data,
            Layout::rows(self.in_f),
        );
        dx
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<F>)) {
        f(&join(prefix, "weight"), &self.weight);
        f(&join(prefix, "bias"), &self.bias);
    }
}

/// Spatial mean per channel: `[N, C, H, W] -> [N, C, 1, 1]`.
#[derive(Debug, Clone, Default)]
pub struct GlobalAvgPool {
    hw: Option<(usize, usize)>,
}

impl<F: Float> Module<F> for GlobalAvgPool {
    fn forward(&mut self, x: Tensor<F>, _train: bool) -> Tensor<F> {
        self.hw = Some((x.h, x.w));
        Module::<F>::infer(self, x)
    }

    fn infer(&self, x: Tensor<F>) -> Tensor<F> {
        let plane = x.h * x.w;
        let inv = F::of(1.0 / plane as f64);
        let data = x
            .data
            .chunks(plane)
            .map(|p| p.iter().copied().sum::<F>() * inv)
            .collect();
        Tensor::from_vec(x.n, x.c, 1, 1, data)
    }

    fn backward(&mut self, dy: Tensor<F>) -> Tensor<F> {
        let (h, w) = self.hw.take().expect("pool backward without forward");
        let inv = F::of(1.0 / (h * w) as f64);
        let mut data = Vec::with_capacity(dy.len() * h * w);
        for d in &dy.data {
            data.extend(std::iter::repeat_n(*d * inv, h * w));
        }
        Tensor::from_vec(dy.n, dy.c, h, w, data)
    }

    fn visit_mut(&mut self, _: &str, _: &mut dyn FnMut(&str, &mut Param<F>)) {}

    fn visit(&self, _: &str, _: &mut dyn FnMut(&str, &Param<F>)) {}
}

/// 2x2 max pooling with stride 2 (odd trailing rows/columns dropped).
#[derive(Debug, Clone, Default)]
pub struct MaxPool2 {
    cache: Option<([usize; 4], Vec<usize>)>,
}

impl MaxPool2 {
    fn run<F: Float>(x: &Tensor<F>, record: bool) -> (Tensor<F>, Vec<usize>) {
        let (oh, ow) = (x.h / 2, x.w / 2);
        assert!(oh > 0 && ow > 0, "maxpool: input below 2x2");
        let mut y = Tensor::zeros(x.n, x.c, oh, ow);
        let mut arg = if record {
            Vec::with_capacity(y.len())
        } else {
            Vec::new()
        };
        let mut o = 0;
        for nc in 0..x.n * x.c {
            let base = nc * x.h * x.w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let i0 = base + 2 * oy * x.w + 2 * ox;
                    let mut best = i0;
                    for j in [i0 + 1, i0 + x.w, i0 + x.w + 1] {
                        if x.data[j] > x.data[best] {
                            best = j;
                        }
                    }
                    y.data[o] = x.data[best];
                    if record {
                        arg.push(best);
                    }
                    o += 1;
                }
            }
        }
        (y, arg)
    }
}

impl<F: Float> Module<F> for MaxPool2 {
    fn forward(&mut self, x: Tensor<F>, _train: bool) -> Tensor<F> {
        let (y, arg) = Self::run(&x, true);
        self.cache = Some((x.shape(), arg));
        y
    }

    fn infer(&self, x: Tensor<F>) -> Tensor<F> {
        Self::run(&x, false).0
    }

    fn backward(&mut self, dy: Tensor<F>) -> Tensor<F> {
        let ([n, c, h, w], arg) = self.cache.take().expect("maxpool backward without forward");
        let mut dx = Tensor::zeros(n, c, h, w);
        for (d, &i) in dy.data.iter().zip(&arg) {
            dx.data[i] += *d;
        }
        dx
    }

    fn visit_mut(&mut self, _: &str, _: &mut dyn FnMut(&str, &mut Param<F>)) {}

    fn visit(&self, _: &str, _: &mut dyn FnMut(&str, &Param<F>)) {}
}

/// Sub-pixel rearrangement `[N, C r^2, H, W] -> [N, C, H r, W r]`.
#[derive(Debug, Clone)]
pub struct PixelShuffle {
    pub r: usize,
}

impl PixelShuffle {
    /// Calls `f(src_index, dst_index)` for every element.
    fn each(&self, n: usize, c: usize, h: usize, w: usize, mut f: impl FnMut(usize, usize)) {
        let r = self.r;
        let oc = c / (r * r);
        let (oh, ow) = (h * r, w * r);
        for b in 0..n {
            for o in 0..oc {
                for i in 0..r {
                    for j in 0..r {
                        let ic = o * r * r + i * r + j;
                        for y in 0..h {
                            let src = ((b * c + ic) * h + y) * w;
                            let dst = ((b * oc + o) * oh + y * r + i) * ow + j;
                            for x in 0..w {
                                f(src + x, dst + x * r);
                            }
                        }
                    }
                }
            }
        }
    }
}

impl<F: Float> Module<F> for PixelShuffle {
    fn forward(&mut self, x: Tensor<F>, _train: bool) -> Tensor<F> {
        Module::<F>::infer(self, x)
    }

    fn infer(&self, x: Tensor<F>) -> Tensor<F> {
        let rr = self.r * self.r;
        assert_eq!(x.c % rr, 0, "pixel shuffle: channels not divisible by r^2");
        let mut y = Tensor::zeros(x.n, x.c / rr, x.h * self.r, x.w * self.r);
        self.each(x.n, x.c, x.h, x.w, |s, d| y.data[d] = x.data[s]);
        y
    }

    fn backward(&mut self, dy: Tensor<F>) -> Tensor<F> {
        let rr = self.r * self.r;
        let (h, w) = (dy.h / self.r, dy.w / self.r);
        let mut dx = Tensor::zeros(dy.n, dy.c * rr, h, w);
        self.each(dy.n, dy.c * rr, h, w, |s, d| dx.data[s] = dy.data[d]);
        dx
    }

    fn visit_mut(&mut self, _: &str, _: &mut dyn FnMut(&str, &mut Param<F>)) {}

    fn visit(&self, _: &str, _: &mut dyn FnMut(&str, &Param<F>)) {}
}

fn bilinear_taps<F: Float>(out: usize, len: usize, factor: usize) -> Vec<(usize, usize, F)> {
    (0..out)
        .map(|o| {
            let src = ((o as f64 + 0.5) / factor as f64 - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(len - 1);
            let i1 = (i0 + 1).min(len - 1);
            (i0, i1, F::of(src - i0 as f64))
        })
        .collect()
}

/// Bilinear upsampling by an integer factor with half-pixel centres and
/// edge clamping.
pub fn upsample_bilinear<F: Float>(x: &Tensor<F>, factor: usize) -> Tensor<F> {
    let (oh, ow) = (x.h * factor, x.w * factor);
    let (ty, tx) = (
        bilinear_taps::<F>(oh, x.h, factor),
        bilinear_taps::<F>(ow, x.w, factor),
    );
    let mut y = Tensor::zeros(x.n, x.c, oh, ow);
    for nc in 0..x.n * x.c {
        let src = &x.data[nc * x.h * x.w..(nc + 1) * x.h * x.w];
        let dst = &mut y.data[nc * oh * ow..(nc + 1) * oh * ow];
        for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                let top = src[y0 * x.w + x0] * (F::one() - fx) + src[y0 * x.w + x1] * fx;
                let bot = src[y1 * x.w + x0] * (F::one() - fx) + src[y1 * x.w + x1] * fx;
                dst[oy * ow + ox] = top * (F::one() - fy) + bot * fy;
            }
        }
    }
    y
}

/// Adjoint of [`upsample_bilinear`]: maps an output gradient back onto the
/// `h x w` input grid.
pub fn upsample_bilinear_backward<F: Float>(
    dy: &Tensor<F>,
    factor: usize,
    h: usize,
    w: usize,
) -> Tensor<F> {
    assert_eq!(
        (dy.h, dy.w),
        (h * factor, w * factor),
        "bilinear adjoint shape"
    );
    let (ty, tx) = (
        bilinear_taps::<F>(dy.h, h, factor),
        bilinear_taps::<F>(dy.w, w, factor),
    );
    let mut dx = Tensor::zeros(dy.n, dy.c, h, w);
    for nc in 0..dy.n * dy.c {
        let src = &dy.data[nc * dy.h * dy.w..(nc + 1) * dy.h * dy.w];
        let dst = &mut dx.data[nc * h * w..(nc + 1) * h * w];
        for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                let g = src[oy * dy.w + ox];
                let (top, bot) = (g * (F::one() - fy), g * fy);
                dst[y0 * w + x0] += top * (F::one() - fx);
                dst[y0 * w + x1] += top * fx;
                dst[y1 * w + x0] += bot * (F::one() - fx);
                dst[y1 * w + x1] += bot * fx;
            }
        }
    }
    dx
}
