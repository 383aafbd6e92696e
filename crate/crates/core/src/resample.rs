use crate::{Image, ImagingError, Result};

/// Out-of-range sample handling for the resampling kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Clamp to the nearest edge sample.
    Replicate,
    /// Mirror with the edge sample duplicated (`c b a | a b c`).
    Symmetric,
}

const KERNEL_A: f64 = -0.5;

fn cubic(x: f64) -> f64 {
    let a = KERNEL_A;
    let x = x.abs();
    let x2 = x * x;
    let x3 = x2 * x;
    if x <= 1.0 {
        (a + 2.0) * x3 - (a + 3.0) * x2 + 1.0
    } else if x <= 2.0 {
        a * x3 - 5.0 * a * x2 + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}

fn map_index(idx: i64, len: usize, boundary: Boundary) -> usize {
    let n = len as i64;
    match boundary {
        Boundary::Replicate => idx.clamp(0, n - 1) as usize,
        Boundary::Symmetric => {
            let period = 2 * n;
            let mut i = idx.rem_euclid(period);
            if i >= n {
                i = period - 1 - i;
            }
            i as usize
        }
    }
}

/// Per-output-sample taps `(input index, weight)`, using the half-pixel
/// centre mapping of the common benchmark resizer.
fn contributions(
    in_len: usize,
    out_len: usize,
    scale: f64,
    boundary: Boundary,
    antialias: bool,
) -> Vec<Vec<(usize, f64)>> {
    let shrink = scale < 1.0 && antialias;
    let width = if shrink { 4.0 / scale } else { 4.0 };
    let taps = width.ceil() as i64 + 2;
    (1..=out_len)
        .map(|x| {
            let u = x as f64 / scale + 0.5 * (1.0 - 1.0 / scale);
            let left = (u - width / 2.0).floor() as i64;
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(taps as usize);
            let mut total = 0.0;
            for j in 0..taps {
                let idx = left + j;
                let d = u - idx as f64;
                let w = if shrink {
                    scale * cubic(d * scale)
                } else {
                    cubic(d)
                };
                if w != 0.0 {
                    total += w;
                    row.push((map_index(idx - 1, in_len, boundary), w));
                }
            }
            for t in row.iter_mut() {
                t.1 /= total;
            }
            row
        })
        .collect()
}

/// Resamples one `h x w` plane of `f64` samples without clamping.
pub fn resample_plane(
    src: &[f64],
    h: usize,
    w: usize,
    out_h: usize,
    out_w: usize,
    boundary: Boundary,
    antialias: bool,
) -> Vec<f64> {
    assert_eq!(src.len(), h * w, "plane length");
    let rows = contributions(h, out_h, out_h as f64 / h as f64, boundary, antialias);
    let cols = contributions(w, out_w, out_w as f64 / w as f64, boundary, antialias);
    let mut tmp = vec![0.0f64; out_h * w];
    for (oy, taps) in rows.iter().enumerate() {
        let dst = &mut tmp[oy * w..(oy + 1) * w];
        for &(iy, wt) in taps {
            for (d, s) in dst.iter_mut().zip(&src[iy * w..(iy + 1) * w]) {
                *d += wt * *s;
            }
        }
    }
    let mut out = vec![0.0f64; out_h * out_w];
    for oy in 0..out_h {
        let line = &tmp[oy * w..(oy + 1) * w];
        for (ox, taps) in cols.iter().enumerate() {
            out[oy * out_w + ox] = taps.iter().map(|&(ix, wt)| wt * line[ix]).sum();
        }
    }
    out
}

/// Bicubic resampling (`a = -0.5`) to an explicit output size. Shrinking with
/// `antialias` widens the kernel by the inverse scale.
pub fn interpolate(
    img: &Image,
    out_h: usize,
    out_w: usize,
    boundary: Boundary,
    antialias: bool,
) -> Result<Image> {
    if out_h == 0 || out_w == 0 {
        return Err(ImagingError::Invalid(format!(
            "output extent {out_h}x{out_w}"
        )));
    }
    let (h, w, c) = img.shape();
    let planes: Vec<Vec<f32>> = (0..c)
        .map(|ch| {
            let src: Vec<f64> = img.plane(ch).into_iter().map(f64::from).collect();
            resample_plane(&src, h, w, out_h, out_w, boundary, antialias)
                .into_iter()
                .map(|v| v as f32)
                .collect()
        })
        .collect();
    Image::from_planes(out_h, out_w, &planes)
}

/// Bicubic resize by `scale`; output extent is `round(input * scale)`.
/// Edge-replicate boundary, antialiased when shrinking.
pub fn bicubic_resize(img: &Image, scale: f64) -> Result<Image> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(ImagingError::BadScale(scale));
    }
    let out_h = (img.height() as f64 * scale).round() as usize;
    let out_w = (img.width() as f64 * scale).round() as usize;
    if out_h == 0 || out_w == 0 {
        return Err(ImagingError::Invalid(format!(
            "scale {scale} collapses {}x{}",
            img.height(),
            img.width()
        )));
    }
    if out_h == img.height() && out_w == img.width() {
        return Ok(img.clone());
    }
    interpolate(img, out_h, out_w, Boundary::Replicate, true)
}

pub fn resize_to(img: &Image, out_h: usize, out_w: usize) -> Result<Image> {
    interpolate(img, out_h, out_w, Boundary::Replicate, true)
}
