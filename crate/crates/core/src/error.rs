use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ImagingError {
    #[error("image file not found: {0}")]
    NotFound(PathBuf),
    #[error("cannot decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("cannot encode {path}: {reason}")]
    Encode { path: PathBuf, reason: String },
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize, usize), (usize, usize, usize)),
    #[error("scale must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("sigma must be non-negative and finite, got {0}")]
    BadSigma(f64),
    #[error("patch size {size} does not fit a {height}x{width} image")]
    PatchTooLarge {
        size: usize,
        height: usize,
        width: usize,
    },
    #[error("stride must be at least 1")]
    ZeroStride,
}
