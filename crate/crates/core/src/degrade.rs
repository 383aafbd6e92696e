use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Image, ImagingError, Result};

/// Normalized 1-D Gaussian taps with radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

fn reflect(idx: i64, len: usize) -> usize {
    let n = len as i64;
    let period = 2 * n;
    let mut i = idx.rem_euclid(period);
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

/// Isotropic Gaussian blur with reflect padding. `sigma == 0` returns the input.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(ImagingError::BadSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let taps = gaussian_kernel(sigma);
    let r = (taps.len() / 2) as i64;
    let (h, w, c) = img.shape();
    let src = img.data();

    let mut tmp = vec![0.0f64; h * w * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, t) in taps.iter().enumerate() {
                    let xx = reflect(x as i64 + k as i64 - r, w);
                    acc += t * src[(y * w + xx) * c + ch] as f64;
                }
                tmp[(y * w + x) * c + ch] = acc;
            }
        }
    }
    let mut out = vec![0.0f32; h * w * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, t) in taps.iter().enumerate() {
                    let yy = reflect(y as i64 + k as i64 - r, h);
                    acc += t * tmp[(yy * w + x) * c + ch];
                }
                out[(y * w + x) * c + ch] = acc as f32;
            }
        }
    }
    Image::from_vec_clamped(h, w, img.color(), out)
}

/// Adds i.i.d. zero-mean Gaussian noise whose standard deviation `sigma` is
/// given in 8-bit levels, then clamps. Deterministic for a given seed.
pub fn add_gaussian_noise(img: &Image, sigma: f64, seed: u64) -> Result<Image> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(ImagingError::BadSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = sigma / 255.0;
    let data = img
        .data()
        .iter()
        .map(|v| {
            let n: f64 = StandardNormal.sample(&mut rng);
            (*v as f64 + s * n) as f32
        })
        .collect();
    Image::from_vec_clamped(img.height(), img.width(), img.color(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ColorSpace;
    use proptest::prelude::*;

    fn noisy(h: usize, w: usize, seed: u64) -> Image {
        let base = Image::constant(h, w, ColorSpace::Gray, 0.5).unwrap();
        add_gaussian_noise(&base, 40.0, seed).unwrap()
    }

    #[test]
    fn zero_sigma_identity() {
        let img = noisy(9, 11, 3);
        assert_eq!(gaussian_blur(&img, 0.0).unwrap(), img);
        assert_eq!(add_gaussian_noise(&img, 0.0, 1).unwrap(), img);
    }

    #[test]
    fn constant_survives_blur() {
        let img = Image::constant(20, 20, ColorSpace::Rgb, 0.7).unwrap();
        for s in [0.1, 2.0, 4.0] {
            let out = gaussian_blur(&img, s).unwrap();
            assert!(out.data().iter().all(|v| (v - 0.7).abs() < 1e-6));
        }
    }

    #[test]
    fn negative_sigma_rejected() {
        let img = noisy(4, 4, 0);
        assert!(matches!(
            gaussian_blur(&img, -1.0),
            Err(ImagingError::BadSigma(_))
        ));
        assert!(matches!(
            add_gaussian_noise(&img, -1.0, 0),
            Err(ImagingError::BadSigma(_))
        ));
    }

    #[test]
    fn noise_is_seeded() {
        let img = Image::constant(16, 16, ColorSpace::Rgb, 0.5).unwrap();
        for sigma in [1.0, 15.0, 30.0] {
            let a = add_gaussian_noise(&img, sigma, 7).unwrap();
            let b = add_gaussian_noise(&img, sigma, 7).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, add_gaussian_noise(&img, sigma, 8).unwrap());
        }
    }

    #[test]
    fn noise_level_is_on_eight_bit_scale() {
        let img = Image::constant(128, 128, ColorSpace::Gray, 0.5).unwrap();
        let out = add_gaussian_noise(&img, 15.0, 11).unwrap();
        let var = out
            .data()
            .iter()
            .map(|v| ((*v as f64) - 0.5).powi(2))
            .sum::<f64>()
            / out.data().len() as f64;
        let sd = var.sqrt() * 255.0;
        assert!((sd - 15.0).abs() < 0.5, "sd {sd}");
    }

    #[test]
    fn blur_radius_larger_than_image() {
        let img = noisy(3, 5, 9);
        let out = gaussian_blur(&img, 4.0).unwrap();
        assert_eq!(out.shape(), img.shape());
    }

    #[test]
    fn kernel_radius() {
        assert_eq!(gaussian_kernel(0.1).len(), 3);
        assert_eq!(gaussian_kernel(2.0).len(), 13);
        assert_eq!(gaussian_kernel(4.0).len(), 25);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn blur_preserves_mean(seed in 0u64..1000, sigma in 0.1f64..4.0) {
            let img = noisy(128, 128, seed);
            let out = gaussian_blur(&img, sigma).unwrap();
            prop_assert!((out.mean() - img.mean()).abs() <= 1e-3);
        }
    }
}
