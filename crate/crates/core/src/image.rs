use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::{ImagingError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ColorSpace {
    Rgb,
    Gray,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Rgb => 3,
            ColorSpace::Gray => 1,
        }
    }
}

/// Floating-point raster with interleaved `H x W x C` samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    color: ColorSpace,
    data: Vec<f32>,
}

impl Image {
    /// Builds an image, rejecting non-finite or out-of-range samples.
    pub fn new(height: usize, width: usize, color: ColorSpace, data: Vec<f32>) -> Result<Self> {
        Self::check_dims(height, width, color, data.len())?;
        if let Some(v) = data
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(ImagingError::Invalid(format!("sample {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            color,
            data,
        })
    }

    /// Builds an image, clamping samples into `[0, 1]`. Non-finite samples are an error.
    pub fn from_vec_clamped(
        height: usize,
        width: usize,
        color: ColorSpace,
        mut data: Vec<f32>,
    ) -> Result<Self> {
        Self::check_dims(height, width, color, data.len())?;
        for v in data.iter_mut() {
            if !v.is_finite() {
                return Err(ImagingError::Invalid("non-finite sample".into()));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self {
            height,
            width,
            color,
            data,
        })
    }

    pub fn constant(height: usize, width: usize, color: ColorSpace, value: f32) -> Result<Self> {
        Self::new(
            height,
            width,
            color,
            vec![value; height * width * color.channels()],
        )
    }

    fn check_dims(height: usize, width: usize, color: ColorSpace, len: usize) -> Result<()> {
        if height == 0 || width == 0 {
            return Err(ImagingError::Invalid(format!(
                "empty extent {height}x{width}"
            )));
        }
        if len != height * width * color.channels() {
            return Err(ImagingError::Invalid(format!(
                "{len} samples for a {height}x{width}x{} image",
                color.channels()
            )));
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.color.channels()
    }

    pub fn color(&self) -> ColorSpace {
        self.color
    }

    /// `(height, width, channels)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels())
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f32 {
        self.data[(row * self.width + col) * self.channels() + ch]
    }

    /// Extracts channel `ch` as a planar `H x W` vector.
    pub fn plane(&self, ch: usize) -> Vec<f32> {
        let c = self.channels();
        self.data.iter().skip(ch).step_by(c).copied().collect()
    }

    /// Reassembles an image from planar channels, clamping into range.
    pub fn from_planes(height: usize, width: usize, planes: &[Vec<f32>]) -> Result<Self> {
        let color = match planes.len() {
            1 => ColorSpace::Gray,
            3 => ColorSpace::Rgb,
            n => return Err(ImagingError::Invalid(format!("{n} planes"))),
        };
        let c = planes.len();
        let mut data = vec![0.0; height * width * c];
        for (ch, plane) in planes.iter().enumerate() {
            if plane.len() != height * width {
                return Err(ImagingError::Invalid("plane length mismatch".into()));
            }
            for (i, v) in plane.iter().enumerate() {
                data[i * c + ch] = *v;
            }
        }
        Self::from_vec_clamped(height, width, color, data)
    }

    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || row + height > self.height || col + width > self.width {
            return Err(ImagingError::Invalid(format!(
                "crop {height}x{width}@({row},{col}) outside {}x{}",
                self.height, self.width
            )));
        }
        let c = self.channels();
        let mut data = Vec::with_capacity(height * width * c);
        for r in row..row + height {
            let start = (r * self.width + col) * c;
            data.extend_from_slice(&self.data[start..start + width * c]);
        }
        Ok(Self {
            height,
            width,
            color: self.color,
            data,
        })
    }

    /// ITU-R BT.601 luma (studio swing, as used by SR benchmarks).
    /// Gray images are returned unchanged.
    pub fn to_luma(&self) -> Image {
        match self.color {
            ColorSpace::Gray => self.clone(),
            ColorSpace::Rgb => {
                let data = self
                    .data
                    .chunks_exact(3)
                    .map(|p| luma_601(p[0], p[1], p[2]))
                    .collect();
                Image {
                    height: self.height,
                    width: self.width,
                    color: ColorSpace::Gray,
                    data,
                }
            }
        }
    }

    /// Replicates a gray image into three channels; RGB images are returned unchanged.
    pub fn to_rgb(&self) -> Image {
        match self.color {
            ColorSpace::Rgb => self.clone(),
            ColorSpace::Gray => {
                let data = self.data.iter().flat_map(|v| [*v, *v, *v]).collect();
                Image {
                    height: self.height,
                    width: self.width,
                    color: ColorSpace::Rgb,
                    data,
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|v| *v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Pixel-wise `lambda * self + (1 - lambda) * other`.
    pub fn blend(&self, other: &Image, lambda: f32) -> Result<Image> {
        if self.shape() != other.shape() {
            return Err(ImagingError::ShapeMismatch(self.shape(), other.shape()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        Image::from_vec_clamped(self.height, self.width, self.color, data)
    }

    pub fn flip_horizontal(&self) -> Image {
        let c = self.channels();
        let mut data = Vec::with_capacity(self.data.len());
        for r in 0..self.height {
            for col in (0..self.width).rev() {
                let i = (r * self.width + col) * c;
                data.extend_from_slice(&self.data[i..i + c]);
            }
        }
        Image {
            data,
            ..self.clone()
        }
    }
}

#[inline]
pub(crate) fn luma_601(r: f32, g: f32, b: f32) -> f32 {
    ((16.0 + 65.481 * r as f64 + 128.553 * g as f64 + 24.966 * b as f64) / 255.0) as f32
}

/// Decodes an 8- or 16-bit raster. Alpha is dropped; gray stays single-channel.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(ImagingError::NotFound(path.to_path_buf()));
    }
    let decoded = image::open(path).map_err(|e| ImagingError::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(from_dynamic(decoded))
}

fn from_dynamic(img: DynamicImage) -> Image {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = !img.color().has_color();
    let sixteen = img.color().bytes_per_pixel() / img.color().channel_count() > 1;
    let (color, data): (ColorSpace, Vec<f32>) = match (gray, sixteen) {
        (true, false) => (
            ColorSpace::Gray,
            img.into_luma8()
                .into_raw()
                .into_iter()
                .map(|v| v as f32 / 255.0)
                .collect(),
        ),
        (true, true) => (
            ColorSpace::Gray,
            img.into_luma16()
                .into_raw()
                .into_iter()
                .map(|v| v as f32 / 65535.0)
                .collect(),
        ),
        (false, false) => (
            ColorSpace::Rgb,
            img.into_rgb8()
                .into_raw()
                .into_iter()
                .map(|v| v as f32 / 255.0)
                .collect(),
        ),
        (false, true) => (
            ColorSpace::Rgb,
            img.into_rgb16()
                .into_raw()
                .into_iter()
                .map(|v| v as f32 / 65535.0)
                .collect(),
        ),
    };
    Image {
        height: h,
        width: w,
        color,
        data,
    }
}

/// Writes an 8-bit PNG (or whatever the extension selects), rounding to the nearest level.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img
        .data
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let (w, h) = (img.width as u32, img.height as u32);
    let enc_err = |e: image::ImageError| ImagingError::Encode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    match img.color {
        ColorSpace::Gray => ImageBuffer::<Luma<u8>, _>::from_raw(w, h, bytes)
            .expect("buffer length checked at construction")
            .save(path)
            .map_err(enc_err),
        ColorSpace::Rgb => ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, bytes)
            .expect("buffer length checked at construction")
            .save(path)
            .map_err(enc_err),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_and_zero_levels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.png");
        ImageBuffer::<Luma<u8>, _>::from_raw(2, 1, vec![255u8, 0u8])
            .unwrap()
            .save(&p)
            .unwrap();
        let img = load_image(&p).unwrap();
        assert_eq!(img.color(), ColorSpace::Gray);
        assert_eq!(img.data(), &[1.0, 0.0]);
    }

    #[test]
    fn sixteen_bit_gray_is_normalized() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x16.png");
        ImageBuffer::<Luma<u16>, _>::from_raw(2, 1, vec![65535u16, 0])
            .unwrap()
            .save(&p)
            .unwrap();
        let img = load_image(&p).unwrap();
        assert_eq!(img.data(), &[1.0, 0.0]);
    }

    #[test]
    fn missing_and_undecodable_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_image(dir.path().join("nope.png")),
            Err(ImagingError::NotFound(_))
        ));
        let bad = dir.path().join("bad.png");
        std::fs::write(&bad, b"not a png").unwrap();
        assert!(matches!(load_image(&bad), Err(ImagingError::Decode { .. })));
    }

    #[test]
    fn rejects_out_of_range_and_empty() {
        assert!(Image::new(1, 1, ColorSpace::Gray, vec![1.5]).is_err());
        assert!(Image::new(1, 1, ColorSpace::Gray, vec![f32::NAN]).is_err());
        assert!(Image::new(0, 1, ColorSpace::Gray, vec![]).is_err());
        let c = Image::from_vec_clamped(1, 2, ColorSpace::Gray, vec![-0.5, 2.0]).unwrap();
        assert_eq!(c.data(), &[0.0, 1.0]);
    }

    #[test]
    fn luma_of_white_and_black() {
        let img = Image::new(1, 2, ColorSpace::Rgb, vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let y = img.to_luma();
        assert!((y.data()[0] - 235.0 / 255.0).abs() < 1e-6);
        assert!((y.data()[1] - 16.0 / 255.0).abs() < 1e-6);
    }

    #[test]
    fn planes_round_trip() {
        let img = Image::new(1, 2, ColorSpace::Rgb, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let planes: Vec<_> = (0..3).map(|c| img.plane(c)).collect();
        assert_eq!(planes[1], vec![0.2, 0.5]);
        assert_eq!(Image::from_planes(1, 2, &planes).unwrap(), img);
    }
}
