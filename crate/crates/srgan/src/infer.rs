use std::path::Path;

use ranksr_core::{load_image, save_image, Image};
use ranksr_metrics::list_images;
use ranksr_nn::Tensor;
use serde::{Deserialize, Serialize};

use crate::{Generator, Result, SrError, MIN_LR_SIDE, SCALE};

/// Tiles are `tile` low-resolution pixels wide, overlap by `overlap`
/// output pixels blended linearly, and are computed with enough context
/// around them that every kept output pixel sees its full receptive field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TileConfig {
    pub tile: usize,
    pub overlap: usize,
}

impl Default for TileConfig {
    fn default() -> Self {
        Self {
            tile: 64,
            overlap: 8,
        }
    }
}

/// Tile starts along one axis of `len` low-resolution pixels.
fn starts(len: usize, tile: usize, step: usize) -> Vec<usize> {
    if len <= tile {
        return vec![0];
    }
    let mut s: Vec<usize> = (0..)
        .map(|i| i * step)
        .take_while(|&p| p + tile < len)
        .collect();
    s.push(len - tile);
    s.dedup();
    s
}

/// Linear blend weight of output position `i` inside a tile of `len` output
/// pixels whose leading or trailing edge overlaps a neighbour.
fn ramp(i: usize, len: usize, overlap: usize, lead: bool, trail: bool) -> f64 {
    let mut w: f64 = 1.0;
    if lead && i < overlap {
        w = w.min((i as f64 + 0.5) / overlap as f64);
    }
    if trail && len - 1 - i < overlap {
        w = w.min(((len - 1 - i) as f64 + 0.5) / overlap as f64);
    }
    w
}

/// Super-resolves `lr`, optionally tile by tile. Tiled and untiled outputs
/// agree to floating-point rounding.
pub fn infer_sr(g: &Generator<f32>, lr: &Image, tiles: Option<TileConfig>) -> Result<Image> {
    let Some(tc) = tiles else {
        return g.super_resolve(lr);
    };
    if lr.height() < MIN_LR_SIDE || lr.width() < MIN_LR_SIDE {
        return Err(SrError::Undersized {
            height: lr.height(),
            width: lr.width(),
            min: MIN_LR_SIDE,
        });
    }
    if tc.overlap % SCALE != 0 || tc.tile * SCALE <= 2 * tc.overlap {
        return Err(SrError::Config(format!(
            "overlap {} must be a multiple of {SCALE} and under half a tile of {} pixels",
            tc.overlap, tc.tile
        )));
    }
    let (h, w, c) = lr.shape();
    if c != g.config.in_channels {
        return Err(SrError::Channels {
            got: c,
            expected: g.config.in_channels,
        });
    }
    let margin = g.config.receptive_radius() + 1;
    let step = tc.tile - tc.overlap / SCALE;
    let (oh, ow) = (h * SCALE, w * SCALE);
    let mut acc = vec![0.0f64; c * oh * ow];
    let mut wsum = vec![0.0f64; oh * ow];
    let input = Tensor::<f32>::from_image(lr);
    let (ys, xs) = (starts(h, tc.tile, step), starts(w, tc.tile, step));
    for (yi, &y0) in ys.iter().enumerate() {
        for (xi, &x0) in xs.iter().enumerate() {
            let (th, tw) = (tc.tile.min(h), tc.tile.min(w));
            let (cy0, cx0) = (y0.saturating_sub(margin), x0.saturating_sub(margin));
            let (cy1, cx1) = ((y0 + th + margin).min(h), (x0 + tw + margin).min(w));
            let out = g.infer_tensor(&input.crop(cy0, cx0, cy1 - cy0, cx1 - cx0));
            let (oth, otw) = (th * SCALE, tw * SCALE);
            let (oy, ox) = ((y0 - cy0) * SCALE, (x0 - cx0) * SCALE);
            for i in 0..oth {
                let wy = ramp(i, oth, tc.overlap, yi > 0, yi + 1 < ys.len());
                for j in 0..otw {
                    let wt = wy * ramp(j, otw, tc.overlap, xi > 0, xi + 1 < xs.len());
                    let (gy, gx) = (y0 * SCALE + i, x0 * SCALE + j);
                    wsum[gy * ow + gx] += wt;
                    for ch in 0..c {
                        let v = out.data[(ch * out.h + oy + i) * out.w + ox + j] as f64;
                        acc[(ch * oh + gy) * ow + gx] += wt * v;
                    }
                }
            }
        }
    }
    let plane = oh * ow;
    for (k, a) in acc.iter_mut().enumerate() {
        *a /= wsum[k % plane];
    }
    Ok(Tensor::from_vec(1, c, oh, ow, acc.into_iter().map(|v| v as f32).collect()).to_image(0))
}

/// Super-resolves every PNG in `input` into `output` under the same names.
pub fn infer_dir(
    g: &Generator<f32>,
    input: &Path,
    output: &Path,
    tiles: Option<TileConfig>,
) -> Result<usize> {
    std::fs::create_dir_all(output).map_err(|e| SrError::Io {
        path: output.to_path_buf(),
        source: e,
    })?;
    let paths = list_images(input)?;
    for p in &paths {
        let sr = infer_sr(g, &load_image(p)?, tiles)?;
        save_image(&sr, output.join(p.file_name().unwrap_or_default()))?;
    }
    Ok(paths.len())
}
