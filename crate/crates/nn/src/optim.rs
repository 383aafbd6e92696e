use std::collections::BTreeMap;

use crate::{Float, Module};

/// Adaptive-moment optimizer with coupled L2 weight decay
/// (`g + weight_decay * w` enters both moments).
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<F> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub t: u64,
    pub m: BTreeMap<String, Vec<F>>,
    pub v: BTreeMap<String, Vec<F>>,
}

impl<F: Float> Adam<F> {
    pub fn new(lr: f64, beta1: f64, beta2: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            weight_decay,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    /// Applies one update to every trainable parameter of `model` from its
    /// accumulated gradients.
    pub fn step(&mut self, model: &mut dyn Module<F>) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let (lr, wd, eps) = (F::of(self.lr), F::of(self.weight_decay), F::of(self.eps));
        let (fb1, fb2) = (F::of(b1), F::of(b2));
        let (f1b1, f1b2) = (F::of(1.0 - b1), F::of(1.0 - b2));
        let (fc1, fc2) = (F::of(c1), F::of(c2));
        let (ms, vs) = (&mut self.m, &mut self.v);
        model.visit_mut("", &mut |name, p| {
            if !p.trains() {
                return;
            }
            let m = ms
                .entry(name.to_string())
                .or_insert_with(|| vec![F::zero(); p.len()]);
            let v = vs
                .entry(name.to_string())
                .or_insert_with(|| vec![F::zero(); p.len()]);
            for i in 0..p.len() {
                let g = p.grad[i] + wd * p.value[i];
                m[i] = fb1 * m[i] + f1b1 * g;
                v[i] = fb2 * v[i] + f1b2 * g * g;
                let mhat = m[i] / fc1;
                let vhat = v[i] / fc2;
                p.value[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        });
    }
}
