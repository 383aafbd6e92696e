use crate::module::{join, Module, Param};
use crate::{Float, Tensor};

/// Per-channel batch normalization over `(N, H, W)`.
#[derive(Debug, Clone)]
pub struct BatchNorm2d<F> {
    pub c: usize,
    pub eps: f64,
    pub momentum: f64,
    pub gamma: Param<F>,
    pub beta: Param<F>,
    pub running_mean: Param<F>,
    pub running_var: Param<F>,
    cache: Option<Cache<F>>,
}

#[derive(Debug, Clone)]
struct Cache<F> {
    xhat: Tensor<F>,
    inv_std: Vec<F>,
    batch_stats: bool,
}

impl<F: Float> BatchNorm2d<F> {
    pub fn new(c: usize) -> Self {
        Self {
            c,
            eps: 1e-5,
            momentum: 0.1,
            gamma: Param::filled(vec![c], F::one()),
            beta: Param::filled(vec![c], F::zero()),
            running_mean: Param::buffer(vec![c], vec![F::zero(); c]),
            running_var: Param::buffer(vec![c], vec![F::one(); c]),
            cache: None,
        }
    }

    fn channel_stats(x: &Tensor<F>, ch: usize) -> (f64, f64) {
        let plane = x.h * x.w;
        let (mut s, mut s2) = (0.0, 0.0);
        for i in 0..x.n {
            for v in &x.item(i)[ch * plane..(ch + 1) * plane] {
                let v = v.f64();
                s += v;
                s2 += v * v;
            }
        }
        let m = (x.n * plane) as f64;
        let mean = s / m;
        (mean, (s2 / m - mean * mean).max(0.0))
    }

    fn normalize(x: &mut Tensor<F>, ch: usize, mean: F, inv_std: F) {
        let plane = x.h * x.w;
        for i in 0..x.n {
            for v in &mut x.item_mut(i)[ch * plane..(ch + 1) * plane] {
                *v = (*v - mean) * inv_std;
            }
        }
    }

    fn affine(&self, xhat: &Tensor<F>) -> Tensor<F> {
        let mut y = xhat.clone();
        let plane = y.h * y.w;
        for i in 0..y.n {
            let item = y.item_mut(i);
            for ch in 0..self.c {
                let (g, b) = (self.gamma.value[ch], self.beta.value[ch]);
                item[ch * plane..(ch + 1) * plane]
                    .iter_mut()
                    .for_each(|v| *v = *v * g + b);
            }
        }
        y
    }

    fn eval_inv_std(&self, ch: usize) -> F {
        F::of(1.0 / (self.running_var.value[ch].f64() + self.eps).sqrt())
    }
}

impl<F: Float> Module<F> for BatchNorm2d<F> {
    fn forward(&mut self, mut x: Tensor<F>, train: bool) -> Tensor<F> {
        assert_eq!(x.c, self.c, "batchnorm: channel mismatch");
        let mut inv = Vec::with_capacity(self.c);
        for ch in 0..self.c {
            let (mean, inv_std) = if train {
                let (mean, var) = Self::channel_stats(&x, ch);
                let m = (x.n * x.h * x.w) as f64;
                let unbiased = if m > 1.0 { var * m / (m - 1.0) } else { var };
                let mo = self.momentum;
                let rm = &mut self.running_mean.value[ch];
                *rm = F::of((1.0 - mo) * rm.f64() + mo * mean);
                let rv = &mut self.running_var.value[ch];
                *rv = F::of((1.0 - mo) * rv.f64() + mo * unbiased);
                (F::of(mean), F::of(1.0 / (var + self.eps).sqrt()))
            } else {
                (self.running_mean.value[ch], self.eval_inv_std(ch))
            };
            Self::normalize(&mut x, ch, mean, inv_std);
            inv.push(inv_std);
        }
        let y = self.affine(&x);
        self.cache = Some(Cache {
            xhat: x,
            inv_std: inv,
            batch_stats: train,
        });
        y
    }

    fn infer(&self, mut x: Tensor<F>) -> Tensor<F> {
        for ch in 0..self.c {
            Self::normalize(
                &mut x,
                ch,
                self.running_mean.value[ch],
                self.eval_inv_std(ch),
            );
        }
        self.affine(&x)
    }

    fn backward(&mut self, mut dy: Tensor<F>) -> Tensor<F> {
        let Cache {
            xhat,
            inv_std,
            batch_stats,
        } = self
            .cache
            .take()
            .expect("batchnorm backward without forward");
        let plane = dy.h * dy.w;
        let m = F::of((dy.n * plane) as f64);
        for ch in 0..self.c {
            let (mut s_dy, mut s_dyx) = (F::zero(), F::zero());
            for i in 0..dy.n {
                let d = &dy.item(i)[ch * plane..(ch + 1) * plane];
                let xh = &xhat.item(i)[ch * plane..(ch + 1) * plane];
                for (a, b) in d.iter().zip(xh) {
                    s_dy += *a;
                    s_dyx += *a * *b;
                }
            }
            if self.gamma.trains() {
                self.gamma.grad[ch] += s_dyx;
            }
            if self.beta.trains() {
                self.beta.grad[ch] += s_dy;
            }
            let k = self.gamma.value[ch] * inv_std[ch];
            for i in 0..dy.n {
                let xh = &xhat.item(i)[ch * plane..(ch + 1) * plane];
                let d = &mut dy.item_mut(i)[ch * plane..(ch + 1) * plane];
                if batch_stats {
                    for (a, b) in d.iter_mut().zip(xh) {
                        *a = k * (*a - s_dy / m - *b * s_dyx / m);
                    }
                } else {
                    d.iter_mut().for_each(|a| *a *= k);
                }
            }
        }
        dy
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        f(&join(prefix, "weight"), &mut self.gamma);
        f(&join(prefix, "bias"), &mut self.beta);
        f(&join(prefix, "running_mean"), &mut self.running_mean);
        f(&join(prefix, "running_var"), &mut self.running_var);
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<F>)) {
        f(&join(prefix, "weight"), &self.gamma);
        f(&join(prefix, "bias"), &self.beta);
        f(&join(prefix, "running_mean"), &self.running_mean);
        f(&join(prefix, "running_var"), &self.running_var);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_batch_and_tracks_running_stats() {
        let mut bn = BatchNorm2d::<f64>::new(2);
        let x = Tensor::from_vec(2, 2, 1, 2, vec![1.0, 3.0, 10.0, 10.0, 5.0, 7.0, 20.0, 20.0]);
        let y = bn.forward(x, true);
        // channel 0 holds {1, 3, 5, 7}: mean 4, var 5
        let expect = [-3.0, -1.0, 1.0, 3.0].map(|v: f64| v / (5.0f64 + 1e-5).sqrt());
        let got = [y.data[0], y.data[1], y.data[4], y.data[5]];
        for (a, b) in got.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((bn.running_mean.value[0] - 0.4).abs() < 1e-12);
        assert!((bn.running_var.value[0] - (0.9 + 0.1 * 20.0 / 3.0)).abs() < 1e-12);
        let ev = bn.infer(Tensor::from_vec(1, 2, 1, 1, vec![0.4, 1.5]));
        assert!(ev.data[0].abs() < 1e-12);
    }
}
