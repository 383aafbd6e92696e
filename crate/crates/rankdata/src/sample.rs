use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use ranksr_core::{load_image, Image};
use rayon::prelude::*;

use crate::{PatchRef, RankDataError, RankDatasetManifest, Result, Split};

/// Two aligned patches at different levels and their order:
/// `gamma = +1` iff `a` ranks better (lower label) than `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankPairRecord {
    pub a: PatchRef,
    pub b: PatchRef,
    pub gamma: i8,
}

impl RankPairRecord {
    pub fn new(a: PatchRef, b: PatchRef) -> Self {
        let gamma = if a.label < b.label { 1 } else { -1 };
        Self { a, b, gamma }
    }

    pub fn swapped(self) -> Self {
        Self {
            a: self.b,
            b: self.a,
            gamma: -self.gamma,
        }
    }
}

#[derive(Debug, Clone)]
struct RefSlot {
    offsets: Vec<(usize, usize)>,
    /// Per group, the (level index, path, label, score) of each member.
    groups: Vec<Vec<(usize, PathBuf, u32, Option<f64>)>>,
    ref_id: String,
}

/// Precomputed sampling tables for one split.
#[derive(Debug, Clone)]
pub struct PairSampler {
    slots: Vec<RefSlot>,
    level_ids: Vec<String>,
    size: usize,
}

impl PairSampler {
    pub fn new(m: &RankDatasetManifest, split: Split) -> Result<Self> {
        let lookup = m.lookup();
        let groups: Vec<Vec<usize>> = m.groups().into_values().filter(|g| g.len() >= 2).collect();
        if groups.is_empty() {
            return Err(RankDataError::TooFewLevels(m.levels.len()));
        }
        let slots: Vec<RefSlot> = m
            .refs_in(split)
            .into_iter()
            .map(|r| RefSlot {
                offsets: m.offsets(r),
                ref_id: r.ref_id.clone(),
                groups: groups
                    .iter()
                    .map(|g| {
                        g.iter()
                            .map(|&li| {
                                let (path, e) =
                                    lookup[&(r.ref_id.as_str(), m.levels[li].level_id.as_str())];
                                (li, path.to_path_buf(), e.label, e.score)
                            })
                            .collect()
                    })
                    .collect(),
            })
            .filter(|s| !s.offsets.is_empty())
            .collect();
        if slots.is_empty() {
            return Err(RankDataError::EmptySplit(split));
        }
        Ok(Self {
            slots,
            level_ids: m.levels.iter().map(|l| l.level_id.clone()).collect(),
            size: m.patch_spec.size,
        })
    }

    /// Uniform reference, patch position and group, then two distinct levels.
    pub fn sample(&self, rng: &mut impl Rng) -> RankPairRecord {
        let slot = &self.slots[rng.random_range(0..self.slots.len())];
        let offset = slot.offsets[rng.random_range(0..slot.offsets.len())];
        let group = &slot.groups[rng.random_range(0..slot.groups.len())];
        let i = rng.random_range(0..group.len());
        let mut j = rng.random_range(0..group.len() - 1);
        if j >= i {
            j += 1;
        }
        let make = |k: usize| {
            let (li, path, label, score) = &group[k];
            PatchRef {
                ref_id: slot.ref_id.clone(),
                level_id: self.level_ids[*li].clone(),
                path: path.clone(),
                offset,
                size: self.size,
                label: *label,
                score: *score,
            }
        };
        RankPairRecord::new(make(i), make(j))
    }
}

/// Samples one pair from `split`; build a [`PairSampler`] for repeated draws.
pub fn sample_pair(
    m: &RankDatasetManifest,
    split: Split,
    rng: &mut impl Rng,
) -> Result<RankPairRecord> {
    Ok(PairSampler::new(m, split)?.sample(rng))
}

/// Decoded images shared across patch lookups.
#[derive(Debug, Default, Clone)]
pub struct ImageStore {
    images: HashMap<PathBuf, Arc<Image>>,
}

impl ImageStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Decodes every image of `split` in parallel.
    pub fn preload(m: &RankDatasetManifest, split: Split) -> Result<Self> {
        let ids: std::collections::HashSet<&str> =
            m.refs_in(split).iter().map(|r| r.ref_id.as_str()).collect();
        let paths: Vec<PathBuf> = m
            .levels
            .iter()
            .flat_map(|l| l.images.iter())
            .filter(|i| ids.contains(i.ref_id.as_str()))
            .map(|i| i.path.clone())
            .collect();
        let images = paths
            .into_par_iter()
            .map(|p| load_image(&p).map(|img| (p, Arc::new(img))))
            .collect::<std::result::Result<HashMap<_, _>, _>>()?;
        Ok(Self { images })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image(&mut self, path: &std::path::Path) -> Result<Arc<Image>> {
        if let Some(img) = self.images.get(path) {
            return Ok(img.clone());
        }
        let img = Arc::new(load_image(path)?);
        self.images.insert(path.to_path_buf(), img.clone());
        Ok(img)
    }

    pub fn patch(&mut self, p: &PatchRef) -> Result<Image> {
        Ok(self
            .image(&p.path)?
            .crop(p.offset.0, p.offset.1, p.size, p.size)?)
    }
}
