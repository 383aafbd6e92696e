//! Imaging primitives shared by every stage of the rank-guided
//! super-resolution toolkit: the [`Image`] container, PNG I/O, bicubic
//! resampling, patch tiling, synthetic degradations and pixel-fidelity
//! metrics.

mod degrade;
mod error;
mod fidelity;
mod image;
mod patch;
mod resample;
pub mod synthetic;

pub use crate::degrade::{add_gaussian_noise, gaussian_blur, gaussian_kernel};
pub use crate::error::ImagingError;
pub use crate::fidelity::{mse, psnr, rmse, Psnr, PsnrMode};
pub use crate::image::{load_image, save_image, ColorSpace, Image};
pub use crate::patch::{extract_patches, patch_grid, Patch};
pub use crate::resample::{bicubic_resize, interpolate, resample_plane, resize_to, Boundary};

pub type Result<T, E = ImagingError> = std::result::Result<T, E>;
