use std::path::Path;

use ranksr_core::{resample_plane, Boundary, Image};
use serde::{Deserialize, Serialize};

use crate::aggd::aggd_fit;
use crate::linalg::{cholesky_solve, covariance, mean};
use crate::mscn::{gaussian_window, mscn_plane, CoefficientMap};
use crate::report::ImageMetric;
use crate::{MetricError, Polarity, Result};

const FEATURES_PER_SCALE: usize = 18;
const WINDOW: usize = 7;
const FORMAT_VERSION: u32 = 1;
const CANONICAL: &str = include_str!("../assets/niqe_pristine.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NiqeConfig {
    pub block_size: usize,
    pub window_sigma: f64,
    pub scales: usize,
}

impl Default for NiqeConfig {
    fn default() -> Self {
        Self {
            block_size: 96,
            window_sigma: 7.0 / 6.0,
            scales: 2,
        }
    }
}

impl NiqeConfig {
    pub fn feature_dim(&self) -> usize {
        FEATURES_PER_SCALE * self.scales
    }

    fn validate(&self) -> Result<()> {
        let ok = self.scales >= 1
            && self.scales <= 8
            && self.window_sigma > 0.0
            && self.block_size >> (self.scales - 1) >= 2
            && self.block_size.is_multiple_of(1 << (self.scales - 1));
        if ok {
            Ok(())
        } else {
            Err(MetricError::Degenerate(
                "block size must halve cleanly at every scale",
            ))
        }
    }
}

/// Pristine multivariate Gaussian over per-block NSS features.
#[derive(Debug, Clone, PartialEq)]
pub struct NiqeModel {
    mu: Vec<f64>,
    cov: Vec<f64>,
    config: NiqeConfig,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format_version: u32,
    block_size: usize,
    window_sigma: f64,
    scales: usize,
    mu: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl NiqeModel {
    pub fn new(mu: Vec<f64>, cov: Vec<f64>, config: NiqeConfig) -> Result<Self> {
        config.validate()?;
        let dim = config.feature_dim();
        if mu.len() != dim {
            return Err(MetricError::LengthMismatch(mu.len(), dim));
        }
        if cov.len() != dim * dim {
            return Err(MetricError::LengthMismatch(cov.len(), dim * dim));
        }
        if mu.iter().chain(&cov).any(|v| !v.is_finite()) {
            return Err(MetricError::NonFinite);
        }
        for i in 0..dim {
            for j in 0..i {
                let (a, b) = (cov[i * dim + j], cov[j * dim + i]);
                if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1e-300) {
                    return Err(MetricError::Degenerate("covariance is not symmetric"));
                }
            }
        }
        Ok(Self { mu, cov, config })
    }

    /// Pristine parameters shipped with the reference NIQE release.
    pub fn canonical() -> Self {
        Self::from_json(CANONICAL, Path::new("<canonical>")).expect("bundled model parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MetricError::io(path, e))?;
        Self::from_json(&text, path)
    }

    fn from_json(text: &str, path: &Path) -> Result<Self> {
        let bad = |reason: String| MetricError::Format {
            path: path.to_path_buf(),
            reason,
        };
        let doc: ModelDoc = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if doc.format_version != FORMAT_VERSION {
            return Err(bad(format!(
                "unsupported format_version {}",
                doc.format_version
            )));
        }
        let dim = doc.mu.len();
        if doc.cov.len() != dim || doc.cov.iter().any(|r| r.len() != dim) {
            return Err(bad("covariance must be square and match mu".into()));
        }
        let config = NiqeConfig {
            block_size: doc.block_size,
            window_sigma: doc.window_sigma,
            scales: doc.scales,
        };
        Self::new(doc.mu, doc.cov.concat(), config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let dim = self.feature_dim();
        let doc = ModelDoc {
            format_version: FORMAT_VERSION,
            block_size: self.config.block_size,
            window_sigma: self.config.window_sigma,
            scales: self.config.scales,
            mu: self.mu.clone(),
            cov: self.cov.chunks(dim).map(<[f64]>::to_vec).collect(),
        };
        let text = serde_json::to_string_pretty(&doc).expect("plain numeric document");
        std::fs::write(path, text).map_err(|e| MetricError::io(path, e))
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Row-major `feature_dim x feature_dim` covariance.
    pub fn cov(&self) -> &[f64] {
        &self.cov
    }

    pub fn config(&self) -> &NiqeConfig {
        &self.config
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim()
    }
}

fn block_values(map: &CoefficientMap, top: usize, left: usize, size: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(size * size);
    for y in top..top + size {
        out.extend_from_slice(&map.values[y * map.width + left..y * map.width + left + size]);
    }
    out
}

/// 18 features of one square block: the AGGD fit of the coefficients plus
/// fits of their products with the horizontal, vertical and two diagonal
/// (cyclically shifted) neighbours.
fn block_features(block: &[f64], size: usize) -> Option<[f64; FEATURES_PER_SCALE]> {
    let mut out = [0.0; FEATURES_PER_SCALE];
    let p = aggd_fit(block).ok()?;
    out[0] = p.alpha;
    out[1] = (p.beta_left + p.beta_right) / 2.0;
    let n = size as i64;
    let mut prod = vec![0.0; block.len()];
    for (k, (dy, dx)) in [(0i64, 1i64), (1, 0), (1, 1), (1, -1)]
        .into_iter()
        .enumerate()
    {
        for y in 0..n {
            let sy = (y - dy).rem_euclid(n);
            for x in 0..n {
                let sx = (x - dx).rem_euclid(n);
                let i = (y * n + x) as usize;
                prod[i] = block[i] * block[(sy * n + sx) as usize];
            }
        }
        let q = aggd_fit(&prod).ok()?;
        out[2 + 4 * k..6 + 4 * k].copy_from_slice(&[q.alpha, q.mean(), q.beta_left, q.beta_right]);
    }
    Some(out)
}

/// Per-block feature vectors of a single-channel image, blocks in row-major
/// order. The image is cropped to whole blocks and halved between scales;
/// blocks whose statistics are degenerate at any scale are dropped.
pub fn niqe_features(gray: &Image, config: &NiqeConfig) -> Result<Vec<Vec<f64>>> {
    if gray.channels() != 1 {
        return Err(MetricError::NotGray(gray.channels()));
    }
    config.validate()?;
    let bs = config.block_size;
    let (nh, nw) = (gray.height() / bs, gray.width() / bs);
    if nh == 0 || nw == 0 {
        return Err(MetricError::TooSmall {
            height: gray.height(),
            width: gray.width(),
            block: bs,
        });
    }
    let (mut ph, mut pw) = (nh * bs, nw * bs);
    let src_w = gray.width();
    let mut plane = Vec::with_capacity(ph * pw);
    for y in 0..ph {
        plane.extend(
            gray.data()[y * src_w..y * src_w + pw]
                .iter()
                .map(|v| (*v as f64 * 255.0).round_ties_even()),
        );
    }
    let window = gaussian_window(WINDOW, config.window_sigma);
    let mut blocks: Vec<Option<Vec<f64>>> =
        vec![Some(Vec::with_capacity(config.feature_dim())); nh * nw];
    for s in 0..config.scales {
        let map = mscn_plane(&plane, ph, pw, &window, 1.0);
        let b = bs >> s;
        for bi in 0..nh {
            for bj in 0..nw {
                let slot = &mut blocks[bi * nw + bj];
                if let Some(acc) = slot {
                    match block_features(&block_values(&map, bi * b, bj * b, b), b) {
                        Some(f) => acc.extend_from_slice(&f),
                        None => *slot = None,
                    }
                }
            }
        }
        if s + 1 < config.scales {
            plane = resample_plane(&plane, ph, pw, ph / 2, pw / 2, Boundary::Symmetric, true);
            ph /= 2;
            pw /= 2;
        }
    }
    Ok(blocks.into_iter().flatten().collect())
}

fn as_gray(img: &Image) -> Image {
    if img.channels() == 1 {
        img.clone()
    } else {
        img.to_luma()
    }
}

/// Fits a pristine model to the pooled blocks of `corpus`. Uses the
/// population covariance so that repeating the corpus leaves the model
/// unchanged.
pub fn fit_pristine(corpus: &[Image], config: NiqeConfig) -> Result<NiqeModel> {
    if corpus.len() < 2 {
        return Err(MetricError::TooFew {
            need: 2,
            got: corpus.len(),
        });
    }
    let mut rows = Vec::new();
    for img in corpus {
        rows.extend(niqe_features(&as_gray(img), &config)?);
    }
    let dim = config.feature_dim();
    if rows.len() < dim + 1 {
        return Err(MetricError::InsufficientBlocks {
            need: dim + 1,
            got: rows.len(),
        });
    }
    let mu = mean(&rows, dim);
    let cov = covariance(&rows, &mu, 0);
    NiqeModel::new(mu, cov, config)
}

/// NIQE score (lower is better). RGB input is converted to luma.
pub fn niqe(img: &Image, model: &NiqeModel) -> Result<f64> {
    let rows = niqe_features(&as_gray(img), &model.config)?;
    if rows.is_empty() {
        return Err(MetricError::InsufficientBlocks { need: 1, got: 0 });
    }
    let dim = model.feature_dim();
    let mu = mean(&rows, dim);
    let cov = if rows.len() > 1 {
        covariance(&rows, &mu, 1)
    } else {
        vec![0.0; dim * dim]
    };
    let mut pooled: Vec<f64> = model
        .cov
        .iter()
        .zip(&cov)
        .map(|(a, b)| (a + b) / 2.0)
        .collect();
    let trace: f64 = (0..dim).map(|i| pooled[i * dim + i]).sum();
    let ridge = 1e-8 * trace / dim as f64;
    for i in 0..dim {
        pooled[i * dim + i] += ridge;
    }
    let diff: Vec<f64> = model.mu.iter().zip(&mu).map(|(a, b)| a - b).collect();
    let x = cholesky_solve(&pooled, &diff).ok_or(MetricError::Singular)?;
    let q: f64 = diff.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(q.max(0.0).sqrt())
}

/// NIQE as a batch-scorable metric.
#[derive(Debug, Clone)]
pub struct NiqeMetric {
    pub model: NiqeModel,
}

impl ImageMetric for NiqeMetric {
    fn id(&self) -> &str {
        "niqe"
    }

    fn polarity(&self) -> Polarity {
        Polarity::LowerBetter
    }

    fn score(&self, img: &Image) -> Result<f64> {
        niqe(img, &self.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ranksr_core::{gaussian_blur, synthetic, ColorSpace};

    fn textured(h: usize, w: usize, seed: u64) -> Image {
        synthetic::dead_leaves(h, w, seed).to_luma()
    }

    #[test]
    fn canonical_model_shape() {
        let m = NiqeModel::canonical();
        assert_eq!(m.feature_dim(), 36);
        assert_eq!(m.mu().len(), 36);
        assert_eq!(*m.config(), NiqeConfig::default());
    }

    #[test]
    fn block_tiling() {
        let cfg = NiqeConfig::default();
        let f = niqe_features(&textured(192, 192, 1), &cfg).unwrap();
        assert_eq!(f.len(), 4);
        assert!(f.iter().all(|v| v.len() == 36));
        // partial blocks are cropped away
        assert_eq!(
            niqe_features(&textured(200, 300, 1), &cfg).unwrap().len(),
            6
        );
        assert_eq!(f, niqe_features(&textured(192, 192, 1), &cfg).unwrap());
    }

    #[test]
    fn too_small_and_constant() {
        let cfg = NiqeConfig::default();
        let small = textured(95, 200, 2);
        assert!(matches!(
            niqe_features(&small, &cfg),
            Err(MetricError::TooSmall { .. })
        ));
        let flat = Image::constant(192, 192, ColorSpace::Gray, 0.5).unwrap();
        assert!(niqe_features(&flat, &cfg).unwrap().is_empty());
        assert!(matches!(
            niqe(&flat, &NiqeModel::canonical()),
            Err(MetricError::InsufficientBlocks { .. })
        ));
    }

    #[test]
    fn deterministic_and_finite() {
        let model = NiqeModel::canonical();
        let img = synthetic::dead_leaves(192, 192, 4);
        let a = niqe(&img, &model).unwrap();
        assert!(a.is_finite() && a > 0.0);
        assert_eq!(a.to_bits(), niqe(&img, &model).unwrap().to_bits());
        let (h, w, _) = img.shape();
        let plus_zero: Vec<f32> = img.data().iter().map(|v| v + 0.0).collect();
        let shifted = Image::from_vec_clamped(h, w, img.color(), plus_zero).unwrap();
        assert_eq!(a.to_bits(), niqe(&shifted, &model).unwrap().to_bits());
    }

    #[test]
    fn blur_raises_score() {
        let model = NiqeModel::canonical();
        let path = concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/tests/fixtures/niqe/images/camera_clean.png"
        );
        let img = ranksr_core::load_image(path).unwrap();
        let sharp = niqe(&img, &model).unwrap();
        let blurred = niqe(&gaussian_blur(&img, 3.0).unwrap(), &model).unwrap();
        assert!(blurred > sharp + 1.0, "{sharp} vs {blurred}");
    }

    #[test]
    fn pristine_fit_properties() {
        let cfg = NiqeConfig::default();
        let corpus: Vec<Image> = (0..5).map(|s| textured(288, 288, 40 + s)).collect();
        let model = fit_pristine(&corpus, cfg).unwrap();
        let dim = model.feature_dim();
        for i in 0..dim {
            for j in 0..dim {
                assert_eq!(model.cov()[i * dim + j], model.cov()[j * dim + i]);
            }
        }
        let doubled: Vec<Image> = corpus.iter().chain(&corpus).cloned().collect();
        let again = fit_pristine(&doubled, cfg).unwrap();
        for (a, b) in model.mu().iter().zip(again.mu()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        for (a, b) in model.cov().iter().zip(again.cov()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        assert!(matches!(
            fit_pristine(&corpus[..1], cfg),
            Err(MetricError::TooFew { .. })
        ));
        let tiny = vec![textured(192, 192, 1), textured(192, 192, 2)];
        assert!(matches!(
            fit_pristine(&tiny, cfg),
            Err(MetricError::InsufficientBlocks { need: 37, got: 8 })
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = NiqeModel::canonical();
        m.save(&path).unwrap();
        assert_eq!(NiqeModel::load(&path).unwrap(), m);
        std::fs::write(&path, "{\"format_version\": 9}").unwrap();
        assert!(matches!(
            NiqeModel::load(&path),
            Err(MetricError::Format { .. })
        ));
    }
}
