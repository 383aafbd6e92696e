use crate::float::{gemm, Layout};
use crate::module::{join, Module, Param};
use crate::{Float, Tensor};

/// Column-buffer budget in elements; larger batches are processed in chunks.
const COLS_BUDGET: usize = 1 << 23;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Geom {
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    s: usize,
    p: usize,
    oh: usize,
    ow: usize,
}

impl Geom {
    fn rows(&self) -> usize {
        self.c * self.k * self.k
    }

    fn plane(&self) -> usize {
        self.oh * self.ow
    }

    /// Output columns `[lo, hi)` whose input column stays inside the image.
    fn valid(&self, offset: usize, extent: usize, out: usize) -> (usize, usize) {
        let (s, p) = (self.s as i64, self.p as i64);
        let o = offset as i64;
        // smallest x with x*s + o - p >= 0, largest with x*s + o - p < extent
        let lo = ((p - o).max(0) + s - 1) / s;
        let hi = ((extent as i64 - o + p - 1).div_euclid(s) + 1).clamp(0, out as i64);
        (
            lo.min(out as i64) as usize,
            hi.max(lo.min(out as i64)) as usize,
        )
    }
}

/// Writes the patch matrix of one item into `cols` (row stride `ld`,
/// starting at column `off`).
fn im2col<F: Float>(x: &[F], g: &Geom, cols: &mut [F], ld: usize, off: usize) {
    let (xlo, xhi): (Vec<usize>, Vec<usize>) = (0..g.k).map(|kx| g.valid(kx, g.w, g.ow)).unzip();
    for ci in 0..g.c {
        let xc = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (ci * g.k + ky) * g.k + kx;
                let dst = &mut cols[row * ld + off..row * ld + off + g.plane()];
                let (lo, hi) = (xlo[kx], xhi[kx]);
                for oy in 0..g.oh {
                    let seg = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    let iy = (oy * g.s + ky) as i64 - g.p as i64;
                    if iy < 0 || iy >= g.h as i64 {
                        seg.fill(F::zero());
                        continue;
                    }
                    let src = &xc[iy as usize * g.w..(iy as usize + 1) * g.w];
                    seg[..lo].fill(F::zero());
                    seg[hi..].fill(F::zero());
                    let base = (lo * g.s + kx) as i64 - g.p as i64;
                    if lo == hi {
                        continue;
                    }
                    if g.s == 1 {
                        let b = base as usize;
                        seg[lo..hi].copy_from_slice(&src[b..b + hi - lo]);
                    } else {
                        for (j, v) in seg[lo..hi].iter_mut().enumerate() {
                            *v = src[base as usize + j * g.s];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-adds columns back into `dx`.
fn col2im<F: Float>(cols: &[F], g: &Geom, ld: usize, off: usize, dx: &mut [F]) {
    let (xlo, xhi): (Vec<usize>, Vec<usize>) = (0..g.k).map(|kx| g.valid(kx, g.w, g.ow)).unzip();
    for ci in 0..g.c {
        let xc = &mut dx[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (ci * g.k + ky) * g.k + kx;
                let src = &cols[row * ld + off..row * ld + off + g.plane()];
                let (lo, hi) = (xlo[kx], xhi[kx]);
                for oy in 0..g.oh {
                    let iy = (oy * g.s + ky) as i64 - g.p as i64;
                    if iy < 0 || iy >= g.h as i64 {
                        continue;
                    }
                    let seg = &src[oy * g.ow..(oy + 1) * g.ow];
                    let dst = &mut xc[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let base = (lo * g.s + kx) as i64 - g.p as i64;
                    for (j, v) in seg[lo..hi].iter().enumerate() {
                        dst[base as usize + j * g.s] += *v;
                    }
                }
            }
        }
    }
}

/// 2-D convolution (cross-correlation) with zero padding.
#[derive(Debug, Clone)]
pub struct Conv2d<F> {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    /// `[out_c, in_c * k * k]`
    pub weight: Param<F>,
    pub bias: Option<Param<F>>,
    cache: Option<Tensor<F>>,
}

impl<F: Float> Conv2d<F> {
    pub fn new(in_c: usize, out_c: usize, k: usize, stride: usize, pad: usize, bias: bool) -> Self {
        assert!(k >= 1 && stride >= 1);
        Self {
            in_c,
            out_c,
            k,
            stride,
            pad,
            weight: Param::filled(vec![out_c, in_c, k, k], F::zero()),
            bias: bias.then(|| Param::filled(vec![out_c], F::zero())),
            cache: None,
        }
    }

    pub fn fan_in(&self) -> usize {
        self.in_c * self.k * self.k
    }

    pub fn out_size(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let eh = h + 2 * self.pad;
        let ew = w + 2 * self.pad;
        (eh >= self.k && ew >= self.k).then(|| {
            (
                (eh - self.k) / self.stride + 1,
                (ew - self.k) / self.stride + 1,
            )
        })
    }

    fn geom(&self, x: &Tensor<F>) -> Geom {
        assert_eq!(x.c, self.in_c, "conv: channel mismatch");
        let (oh, ow) = self
            .out_size(x.h, x.w)
            .unwrap_or_else(|| panic!("conv: {}x{} input below kernel {}", x.h, x.w, self.k));
        Geom {
            c: x.c,
            h: x.h,
            w: x.w,
            k: self.k,
            s: self.stride,
            p: self.pad,
            oh,
            ow,
        }
    }

    fn chunk(&self, g: &Geom, n: usize) -> usize {
        (COLS_BUDGET / (g.rows() * g.plane()).max(1)).clamp(1, n)
    }

    fn pointwise(g: &Geom) -> bool {
        g.k == 1 && g.s == 1 && g.p == 0
    }

    fn run(&self, x: &Tensor<F>) -> Tensor<F> {
        let g = self.geom(x);
        let (rows, plane) = (g.rows(), g.plane());
        let mut y = Tensor::zeros(x.n, self.out_c, g.oh, g.ow);
        let chunk = self.chunk(&g, x.n);
        let mut cols = Vec::new();
        let mut tmp = Vec::new();
        for start in (0..x.n).step_by(chunk) {
            let m = chunk.min(x.n - start);
            let ld = m * plane;
            if Self::pointwise(&g) && m == 1 {
                gemm(
                    self.out_c,
                    rows,
                    plane,
                    F::one(),
                    &self.weight.value,
                    Layout::rows(rows),
                    x.item(start),
                    Layout::rows(plane),
                    F::zero(),
                    y.item_mut(start),
                    Layout::rows(plane),
                );
            } else {
                cols.resize(rows * ld, F::zero());
                for i in 0..m {
                    im2col(x.item(start + i), &g, &mut cols, ld, i * plane);
                }
                tmp.resize(self.out_c * ld, F::zero());
                gemm(
                    self.out_c,
                    rows,
                    ld,
                    F::one(),
                    &self.weight.value,
                    Layout::rows(rows),
                    &cols,
                    Layout::rows(ld),
                    F::zero(),
                    &mut tmp,
                    Layout::rows(ld),
                );
                for i in 0..m {
                    let item = y.item_mut(start + i);
                    for o in 0..self.out_c {
                        item[o * plane..(o + 1) * plane]
                            .copy_from_slice(&tmp[o * ld + i * plane..o * ld + (i + 1) * plane]);
                    }
                }
            }
        }
        if let Some(b) = &self.bias {
            for i in 0..x.n {
                let item = y.item_mut(i);
                for (o, bv) in b.value.iter().enumerate() {
                    item[o * plane..(o + 1) * plane]
                        .iter_mut()
                        .for_each(|v| *v += *bv);
                }
            }
        }
        y
    }
}

impl<F: Float> Module<F> for Conv2d<F> {
    fn forward(&mut self, x: Tensor<F>, _train: bool) -> Tensor<F> {
        let y = self.run(&x);
        self.cache = Some(x);
        y
    }

    fn infer(&self, x: Tensor<F>) -> Tensor<F> {
        self.run(&x)
    }

    fn backward(&mut self, dy: Tensor<F>) -> Tensor<F> {
        let x = self.cache.take().expect("conv backward without forward");
        let g = self.geom(&x);
        let (rows, plane) = (g.rows(), g.plane());
        assert_eq!(
            dy.shape(),
            [x.n, self.out_c, g.oh, g.ow],
            "conv: gradient shape"
        );
        let mut dx = Tensor::zeros(x.n, x.c, x.h, x.w);
        let train_w = self.weight.trains();
        if let Some(b) = self.bias.as_mut().filter(|b| b.trains()) {
            for i in 0..x.n {
                for (o, gb) in b.grad.iter_mut().enumerate() {
                    *gb += dy.item(i)[o * plane..(o + 1) * plane]
                        .iter()
                        .copied()
                        .sum::<F>();
                }
            }
        }
        let chunk = self.chunk(&g, x.n);
        let (mut cols, mut dyt, mut dcols) = (Vec::new(), Vec::new(), Vec::new());
        for start in (0..x.n).step_by(chunk) {
            let m = chunk.min(x.n - start);
            let ld = m * plane;
            dyt.resize(self.out_c * ld, F::zero());
            for i in 0..m {
                let item = dy.item(start + i);
                for o in 0..self.out_c {
                    dyt[o * ld + i * plane..o * ld + (i + 1) * plane]
                        .copy_from_slice(&item[o * plane..(o + 1) * plane]);
                }
            }
            if train_w {
                cols.resize(rows * ld, F::zero());
                for i in 0..m {
                    im2col(x.item(start + i), &g, &mut cols, ld, i * plane);
                }
                gemm(
                    self.out_c,
                    ld,
                    rows,
                    F::one(),
                    &dyt,
                    Layout::rows(ld),
                    &cols,
                    Layout::trans(ld),
                    F::one(),
                    &mut self.weight.grad,
                    Layout::rows(rows),
                );
            }
            dcols.resize(rows * ld, F::zero());
            gemm(
                rows,
                self.out_c,
                ld,
                F::one(),
                &self.weight.value,
                Layout::trans(rows),
                &dyt,
                Layout::rows(ld),
                F::zero(),
                &mut dcols,
                Layout::rows(ld),
            );
            for i in 0..m {
                col2im(&dcols, &g, ld, i * plane, dx.item_mut(start + i));
            }
        }
        dx
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        if let Some(b) = &mut self.bias {
            f(&join(prefix, "bias"), b);
        }
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<F>)) {
        f(&join(prefix, "weight"), &self.weight);
        if let Some(b) = &self.bias {
            f(&join(prefix, "bias"), b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(conv: &Conv2d<f64>, x: &Tensor<f64>) -> Tensor<f64> {
        let (oh, ow) = conv.out_size(x.h, x.w).unwrap();
        let mut y = Tensor::zeros(x.n, conv.out_c, oh, ow);
        let k = conv.k;
        for n in 0..x.n {
            for o in 0..conv.out_c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = conv.bias.as_ref().map_or(0.0, |b| b.value[o]);
                        for c in 0..x.c {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let iy = (oy * conv.stride + ky) as i64 - conv.pad as i64;
                                    let ix = (ox * conv.stride + kx) as i64 - conv.pad as i64;
                                    if iy < 0 || ix < 0 || iy >= x.h as i64 || ix >= x.w as i64 {
                                        continue;
                                    }
                                    let wv = conv.weight.value[((o * x.c + c) * k + ky) * k + kx];
                                    acc += wv
                                        * x.data[((n * x.c + c) * x.h + iy as usize) * x.w
                                            + ix as usize];
                                }
                            }
                        }
                        y.data[((n * conv.out_c + o) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        y
    }

    fn filled(conv: &mut Conv2d<f64>, seed: u64) {
        let mut s = seed;
        let mut next = move || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 33) as f64 / (1u64 << 31) as f64) - 0.5
        };
        conv.weight.value.iter_mut().for_each(|v| *v = next());
        if let Some(b) = &mut conv.bias {
            b.value.iter_mut().for_each(|v| *v = next());
        }
    }

    #[test]
    fn matches_direct_convolution() {
        for &(k, s, p, h, w) in &[
            (3, 1, 1, 7, 5),
            (4, 2, 1, 8, 9),
            (1, 1, 0, 4, 4),
            (3, 2, 0, 9, 6),
            (5, 1, 2, 3, 3),
        ] {
            let mut conv = Conv2d::<f64>::new(2, 3, k, s, p, true);
            filled(&mut conv, (k * 31 + s) as u64);
            let x = Tensor::from_vec(
                2,
                2,
                h,
                w,
                (0..2 * 2 * h * w)
                    .map(|i| ((i * 7) % 11) as f64 / 5.0 - 1.0)
                    .collect(),
            );
            let y = conv.infer(x.clone());
            let r = naive(&conv, &x);
            assert_eq!(y.shape(), r.shape());
            for (a, b) in y.data.iter().zip(&r.data) {
                assert!((a - b).abs() < 1e-12, "k{k} s{s} p{p}");
            }
        }
    }

    #[test]
    fn backward_is_adjoint() {
        // <conv(x), u> == <x, conv^T(u)> for the bias-free map
        let mut conv = Conv2d::<f64>::new(3, 2, 4, 2, 1, false);
        filled(&mut conv, 9);
        let x = Tensor::from_vec(
            2,
            3,
            8,
            6,
            (0..288).map(|i| (i as f64 * 0.37).sin()).collect(),
        );
        let y = conv.forward(x.clone(), true);
        let u = Tensor::from_vec(
            y.n,
            y.c,
            y.h,
            y.w,
            (0..y.len()).map(|i| (i as f64 * 0.71).cos()).collect(),
        );
        let lhs: f64 = y.data.iter().zip(&u.data).map(|(a, b)| a * b).sum();
        let dx = conv.backward(u.clone());
        let rhs: f64 = x.data.iter().zip(&dx.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        // dW is linear in x: <dW, W> == <y, u> for the bias-free map
        let wdot: f64 = conv
            .weight
            .grad
            .iter()
            .zip(&conv.weight.value)
            .map(|(a, b)| a * b)
            .sum();
        assert!((wdot - lhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }
}
