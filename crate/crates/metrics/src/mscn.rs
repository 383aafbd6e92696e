use ranksr_core::Image;

use crate::{MetricError, Result};

/// Mean-subtracted contrast-normalized coefficients of one plane.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl CoefficientMap {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Normalized 1-D taps of a `size`-point Gaussian; the 2-D window is their
/// outer product.
pub fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size as f64 - 1.0) / 2.0;
    let mut taps: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - half;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// Separable correlation with edge-replicate boundary.
fn filter_replicate(src: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as i64;
    let (hi, wi) = (h as i64 - 1, w as i64 - 1);
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let xx = (x as i64 + k as i64 - r).clamp(0, wi) as usize;
                acc += t * row[xx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for (k, t) in taps.iter().enumerate() {
            let yy = (y as i64 + k as i64 - r).clamp(0, hi) as usize;
            let src_row = &tmp[yy * w..(yy + 1) * w];
            for (o, s) in out[y * w..(y + 1) * w].iter_mut().zip(src_row) {
                *o += t * s;
            }
        }
    }
    out
}

/// MSCN transform of a plane given on the 0-255 scale:
/// `(I - mu) / (sigma + c)` with a Gaussian-weighted local mean and deviation.
pub fn mscn_plane(
    plane: &[f64],
    h: usize,
    w: usize,
    window: &[f64],
    stabilizer: f64,
) -> CoefficientMap {
    let mu = filter_replicate(plane, h, w, window);
    let sq: Vec<f64> = plane.iter().map(|v| v * v).collect();
    let mu_sq = filter_replicate(&sq, h, w, window);
    let values = plane
        .iter()
        .zip(mu.iter().zip(&mu_sq))
        .map(|(v, (m, m2))| {
            let sigma = (m2 - m * m).abs().sqrt();
            (v - m) / (sigma + stabilizer)
        })
        .collect();
    CoefficientMap {
        height: h,
        width: w,
        values,
    }
}

/// MSCN coefficients of a single-channel image (7x7 window, sigma 7/6, C = 1
/// on the 8-bit scale).
pub fn mscn(gray: &Image) -> Result<CoefficientMap> {
    if gray.channels() != 1 {
        return Err(MetricError::NotGray(gray.channels()));
    }
    let plane: Vec<f64> = gray.data().iter().map(|v| *v as f64 * 255.0).collect();
    let window = gaussian_window(7, 7.0 / 6.0);
    Ok(mscn_plane(
        &plane,
        gray.height(),
        gray.width(),
        &window,
        1.0,
    ))
}
