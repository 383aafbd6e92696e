//! A small CPU neural-network engine: NCHW tensors, im2col convolutions on
//! `matrixmultiply`, layer-wise manual backpropagation, an Adam optimizer
//! and safetensors checkpoints.
//!
//! Everything is generic over [`Float`]; models train in `f32` and the same
//! code runs in `f64` for finite-difference gradient checks.

pub mod check;
mod ckpt;
mod conv;
mod error;
mod float;
mod init;
mod layers;
mod module;
mod norm;
mod optim;
mod seq;
mod tensor;

pub use crate::ckpt::Checkpoint;
pub use crate::conv::Conv2d;
pub use crate::error::NnError;
pub use crate::float::{gemm, Float, Layout};
pub use crate::init::he_init;
pub use crate::layers::{
    upsample_bilinear, upsample_bilinear_backward, GlobalAvgPool, LeakyRelu, Linear, MaxPool2,
    PixelShuffle,
};
pub use crate::module::{Module, Param};
pub use crate::norm::BatchNorm2d;
pub use crate::optim::Adam;
pub use crate::seq::{Layer, Sequential};
pub use crate::tensor::Tensor;

/// Hex SHA-256 over every parameter and buffer (names, shapes and values).
pub fn digest<F: Float>(m: &dyn Module<F>) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    m.visit("", &mut |name, p| {
        h.update(name.as_bytes());
        for d in &p.shape {
            h.update((*d as u64).to_le_bytes());
        }
        let mut bytes = Vec::with_capacity(p.len() * 8);
        p.value.iter().for_each(|v| v.to_le(&mut bytes));
        h.update(&bytes);
    });
    hex::encode(h.finalize())
}

/// Copies `src` parameters and buffers into `dst` (identical architectures).
pub fn copy_params<F: Float>(src: &dyn Module<F>, dst: &mut dyn Module<F>) {
    let mut values = Vec::new();
    src.visit("", &mut |_, p| values.push(p.value.clone()));
    let mut it = values.into_iter();
    dst.visit_mut("", &mut |name, p| {
        let v = it
            .next()
            .unwrap_or_else(|| panic!("copy_params: no source for {name}"));
        assert_eq!(v.len(), p.len(), "copy_params: size mismatch at {name}");
        p.value = v;
    });
}
