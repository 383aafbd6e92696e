use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::{Float, Module};

/// He (fan-in) normal initialization of every weight matrix or kernel, for a
/// following leaky ReLU of the given slope; `scale` multiplies the standard
/// deviation. Biases are zeroed and normalization affine terms left as is.
pub fn he_init<F: Float>(m: &mut dyn Module<F>, slope: f64, scale: f64, rng: &mut impl Rng) {
    let gain = (2.0 / (1.0 + slope * slope)).sqrt();
    m.visit_mut("", &mut |name, p| {
        if p.buffer {
            return;
        }
        if p.shape.len() >= 2 {
            let fan_in: usize = p.shape[1..].iter().product();
            let normal =
                Normal::new(0.0, scale * gain / (fan_in as f64).sqrt()).expect("positive std");
            p.value
                .iter_mut()
                .for_each(|v| *v = F::of(normal.sample(rng)));
        } else if name.ends_with("bias") {
            p.value.iter_mut().for_each(|v| *v = F::zero());
        }
    });
}
