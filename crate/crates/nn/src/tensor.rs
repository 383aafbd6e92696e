use ranksr_core::{ColorSpace, Image};

use crate::Float;

/// Dense NCHW activation batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<F>,
}

impl<F: Float> Tensor<F> {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self {
            n,
            c,
            h,
            w,
            data: vec![F::zero(); n * c * h * w],
        }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<F>) -> Self {
        assert_eq!(data.len(), n * c * h * w, "tensor data length");
        Self { n, c, h, w, data }
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Elements per batch item.
    pub fn item_len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn item(&self, i: usize) -> &[F] {
        let s = self.item_len();
        &self.data[i * s..(i + 1) * s]
    }

    pub fn item_mut(&mut self, i: usize) -> &mut [F] {
        let s = self.item_len();
        &mut self.data[i * s..(i + 1) * s]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }

    pub fn map(mut self, f: impl Fn(F) -> F) -> Self {
        self.data.iter_mut().for_each(|v| *v = f(*v));
        self
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert!(self.same_shape(other), "add: shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn scale(mut self, k: F) -> Self {
        self.data.iter_mut().for_each(|v| *v *= k);
        self
    }

    /// Concatenates along the batch axis.
    pub fn stack(parts: &[&Self]) -> Self {
        let first = parts.first().expect("stack of nothing");
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        let mut n = 0;
        for p in parts {
            assert_eq!(
                (p.c, p.h, p.w),
                (first.c, first.h, first.w),
                "stack: shape mismatch"
            );
            data.extend_from_slice(&p.data);
            n += p.n;
        }
        Self::from_vec(n, first.c, first.h, first.w, data)
    }

    /// Batch items `[start, start + count)`.
    pub fn slice(&self, start: usize, count: usize) -> Self {
        let s = self.item_len();
        Self::from_vec(
            count,
            self.c,
            self.h,
            self.w,
            self.data[start * s..(start + count) * s].to_vec(),
        )
    }

    /// Spatial window of every item.
    pub fn crop(&self, top: usize, left: usize, h: usize, w: usize) -> Self {
        assert!(
            top + h <= self.h && left + w <= self.w,
            "crop out of bounds"
        );
        let mut out = Self::zeros(self.n, self.c, h, w);
        for nc in 0..self.n * self.c {
            for y in 0..h {
                let src = (nc * self.h + top + y) * self.w + left;
                let dst = (nc * h + y) * w;
                out.data[dst..dst + w].copy_from_slice(&self.data[src..src + w]);
            }
        }
        out
    }

    pub fn sum(&self) -> F {
        self.data.iter().copied().sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Converts planar images to a batch; all images must share one shape.
    pub fn from_images(images: &[&Image]) -> Self {
        let first = images.first().expect("at least one image");
        let (h, w, c) = first.shape();
        let mut data = Vec::with_capacity(images.len() * c * h * w);
        for img in images {
            assert_eq!(img.shape(), (h, w, c), "batch images must share a shape");
            for ch in 0..c {
                data.extend(img.plane(ch).into_iter().map(|v| F::of(v as f64)));
            }
        }
        Self::from_vec(images.len(), c, h, w, data)
    }

    pub fn from_image(img: &Image) -> Self {
        Self::from_images(&[img])
    }

    /// Item `i` as an image, clamping into `[0, 1]`.
    pub fn to_image(&self, i: usize) -> Image {
        let color = match self.c {
            1 => ColorSpace::Gray,
            3 => ColorSpace::Rgb,
            c => panic!("cannot view {c} channels as an image"),
        };
        let plane = self.h * self.w;
        let planes: Vec<Vec<f32>> = self
            .item(i)
            .chunks(plane)
            .map(|p| p.iter().map(|v| v.f64().clamp(0.0, 1.0) as f32).collect())
            .collect();
        let img = Image::from_planes(self.h, self.w, &planes).expect("finite planes");
        debug_assert_eq!(img.color(), color);
        img
    }
}
