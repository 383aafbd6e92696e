use crate::{Image, ImagingError, Result};

/// A square crop of a source image.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub image: Image,
    pub source_id: String,
    /// `(row, col)` of the top-left corner in the source.
    pub offset: (usize, usize),
}

/// Top-left corners of a `size x size` grid with the given stride, row-major.
pub fn patch_grid(
    height: usize,
    width: usize,
    size: usize,
    stride: usize,
) -> Result<Vec<(usize, usize)>> {
    if stride == 0 {
        return Err(ImagingError::ZeroStride);
    }
    if size == 0 || size > height || size > width {
        return Err(ImagingError::PatchTooLarge {
            size,
            height,
            width,
        });
    }
    let rows = (height - size) / stride + 1;
    let cols = (width - size) / stride + 1;
    Ok((0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r * stride, c * stride)))
        .collect())
}

pub fn extract_patches(
    img: &Image,
    source_id: &str,
    size: usize,
    stride: usize,
) -> Result<Vec<Patch>> {
    patch_grid(img.height(), img.width(), size, stride)?
        .into_iter()
        .map(|(r, c)| {
            Ok(Patch {
                image: img.crop(r, c, size, size)?,
                source_id: source_id.to_string(),
                offset: (r, c),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ColorSpace;
    use proptest::prelude::*;

    #[test]
    fn default_stride_count() {
        let grid = patch_grid(696, 696, 296, 200).unwrap();
        assert_eq!(grid.len(), 9);
        assert_eq!(grid[0], (0, 0));
        assert_eq!(grid[1], (0, 200));
        assert_eq!(grid[8], (400, 400));
    }

    #[test]
    fn exact_fit_single_patch() {
        let img = Image::constant(296, 296, ColorSpace::Gray, 0.5).unwrap();
        let patches = extract_patches(&img, "a", 296, 200).unwrap();
        assert_eq!(patches.len(), 1);
        assert_eq!(patches[0].offset, (0, 0));
        assert_eq!(patches[0].image, img);
    }

    #[test]
    fn oversized_patch_and_zero_stride() {
        assert!(matches!(
            patch_grid(10, 20, 11, 1),
            Err(ImagingError::PatchTooLarge { .. })
        ));
        assert!(matches!(
            patch_grid(10, 20, 5, 0),
            Err(ImagingError::ZeroStride)
        ));
    }

    proptest! {
        #[test]
        fn count_formula_and_containment(h in 1usize..80, w in 1usize..80, size in 1usize..40, stride in 1usize..30) {
            prop_assume!(size <= h && size <= w);
            let grid = patch_grid(h, w, size, stride).unwrap();
            prop_assert_eq!(grid.len(), ((h - size) / stride + 1) * ((w - size) / stride + 1));
            for (r, c) in &grid {
                prop_assert!(r + size <= h && c + size <= w);
            }
        }

        #[test]
        fn stride_equal_size_tiles_without_overlap(h in 1usize..60, w in 1usize..60, size in 1usize..20) {
            prop_assume!(size <= h && size <= w);
            let grid = patch_grid(h, w, size, size).unwrap();
            let mut covered = vec![0u8; h * w];
            for (r, c) in grid {
                for y in r..r + size {
                    for x in c..c + size {
                        covered[y * w + x] += 1;
                    }
                }
            }
            prop_assert!(covered.iter().all(|v| *v <= 1));
        }
    }
}
