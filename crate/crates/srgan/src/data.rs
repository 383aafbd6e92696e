use std::path::Path;

use rand::Rng;
use ranksr_core::{bicubic_resize, load_image, psnr, Image, PsnrMode};
use ranksr_metrics::{list_images, niqe, NiqeModel};
use ranksr_nn::Tensor;

use crate::{Generator, Result, SrError, SCALE};

/// High-resolution images with their bicubic ×1/4 counterparts.
#[derive(Debug, Clone)]
pub struct PairedSet {
    pub ids: Vec<String>,
    pub hr: Vec<Image>,
    pub lr: Vec<Image>,
}

impl PairedSet {
    /// Crops each image to a multiple of the scale and downsamples it.
    pub fn from_hr(ids: Vec<String>, hr: Vec<Image>) -> Result<Self> {
        if hr.is_empty() {
            return Err(SrError::EmptyData);
        }
        let mut hr_out = Vec::with_capacity(hr.len());
        let mut lr = Vec::with_capacity(hr.len());
        for img in hr {
            let img = img.to_rgb();
            let (h, w) = (
                (img.height() / SCALE) * SCALE,
                (img.width() / SCALE) * SCALE,
            );
            let img = if (h, w) == (img.height(), img.width()) {
                img
            } else {
                img.crop(0, 0, h, w)?
            };
            lr.push(bicubic_resize(&img, 1.0 / SCALE as f64)?);
            hr_out.push(img);
        }
        Ok(Self {
            ids,
            hr: hr_out,
            lr,
        })
    }

    /// Every PNG in `dir`, converted to RGB, in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let paths = list_images(dir)?;
        let ids = paths
            .iter()
            .map(|p| {
                p.file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned()
            })
            .collect();
        let hr = paths
            .iter()
            .map(load_image)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::from_hr(ids, hr)
    }

    pub fn len(&self) -> usize {
        self.hr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hr.is_empty()
    }

    pub fn min_lr_side(&self) -> usize {
        self.lr
            .iter()
            .map(|i| i.height().min(i.width()))
            .min()
            .unwrap_or(0)
    }

    /// Aligned random crops: `batch` LR patches of side `lr_patch` and the
    /// matching HR patches.
    pub fn sample_batch(
        &self,
        lr_patch: usize,
        batch: usize,
        rng: &mut impl Rng,
    ) -> Result<(Tensor<f32>, Tensor<f32>)> {
        if self.min_lr_side() < lr_patch {
            return Err(SrError::Config(format!(
                "lr_patch {lr_patch} exceeds the smallest image side {}",
                self.min_lr_side()
            )));
        }
        let mut lrs = Vec::with_capacity(batch);
        let mut hrs = Vec::with_capacity(batch);
        for _ in 0..batch {
            let i = rng.random_range(0..self.len());
            let (lr, hr) = (&self.lr[i], &self.hr[i]);
            let y = rng.random_range(0..=lr.height() - lr_patch);
            let x = rng.random_range(0..=lr.width() - lr_patch);
            lrs.push(lr.crop(y, x, lr_patch, lr_patch)?);
            hrs.push(hr.crop(y * SCALE, x * SCALE, lr_patch * SCALE, lr_patch * SCALE)?);
        }
        Ok((
            Tensor::from_images(&lrs.iter().collect::<Vec<_>>()),
            Tensor::from_images(&hrs.iter().collect::<Vec<_>>()),
        ))
    }
}

/// Mean luma PSNR and mean NIQE of the generator's outputs on a set.
pub fn validate(g: &Generator<f32>, set: &PairedSet, niqe_model: &NiqeModel) -> Result<(f64, f64)> {
    let mut p = 0.0;
    let mut q = 0.0;
    for (lr, hr) in set.lr.iter().zip(&set.hr) {
        let sr = g.super_resolve(lr)?;
        p += psnr(&sr, hr, PsnrMode::Luma)?.db().unwrap_or(100.0);
        q += niqe(&sr, niqe_model)?;
    }
    let n = set.len() as f64;
    Ok((p / n, q / n))
}

/// Bicubic ×4 upsampling baseline.
pub fn bicubic_upscale(lr: &Image) -> Result<Image> {
    Ok(bicubic_resize(lr, SCALE as f64)?)
}
