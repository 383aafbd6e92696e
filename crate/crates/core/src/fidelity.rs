use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Image, ImagingError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PsnrMode {
    /// Mean over all RGB (or gray) samples.
    Rgb,
    /// BT.601 luma channel only.
    Luma,
}

/// Peak signal-to-noise ratio in dB. Identical inputs have no finite PSNR
/// and are reported as [`Psnr::Infinite`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    pub fn db(self) -> Option<f64> {
        match self {
            Psnr::Finite(v) => Some(v),
            Psnr::Infinite => None,
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v:.4}"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

fn check_shapes(a: &Image, b: &Image) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(ImagingError::ShapeMismatch(a.shape(), b.shape()));
    }
    Ok(())
}

/// Mean squared error on the `[0, 1]` scale.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_shapes(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.data().len() as f64)
}

pub fn psnr(a: &Image, b: &Image, mode: PsnrMode) -> Result<Psnr> {
    check_shapes(a, b)?;
    let err = match mode {
        PsnrMode::Rgb => mse(a, b)?,
        PsnrMode::Luma => mse(&a.to_luma(), &b.to_luma())?,
    };
    if err == 0.0 {
        return Ok(Psnr::Infinite);
    }
    Ok(Psnr::Finite(10.0 * (1.0 / err).log10()))
}

/// Root mean squared error over all channels, in 8-bit levels.
pub fn rmse(a: &Image, b: &Image) -> Result<f64> {
    Ok(mse(a, b)?.sqrt() * 255.0)
}
