use std::path::{Path, PathBuf};

use ranksr_core::{gaussian_blur, save_image, Image};
use ranksr_metrics::{NiqeMetric, NiqeModel};
use ranksr_rankdata::{
    build_distortion_rankset, build_sr_rankset, BuildOptions, LevelScores, RankDatasetManifest,
};
use ranksr_srgan::{bicubic_upscale, Generator, PairedSet};

use crate::config::{LevelSpec, RankDataConfig, RankSetKind};
use crate::{ExpError, Result};

fn write_level(dir: &Path, set: &PairedSet, render: impl Fn(usize) -> Result<Image>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| ExpError::io(dir, e))?;
    for (i, id) in set.ids.iter().enumerate() {
        save_image(&render(i)?, dir.join(format!("{id}.png")))?;
    }
    Ok(())
}

/// Renders each level of `specs` for every image of `set` under
/// `out_dir/<level id>`; `dir:` levels are used in place.
pub fn materialize_levels(
    specs: &[LevelSpec],
    set: &PairedSet,
    srresnet: Option<&Generator<f32>>,
    out_dir: &Path,
) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for spec in specs {
        let id = spec.id();
        let dir = out_dir.join(&id);
        match spec {
            LevelSpec::Dir(p) => {
                out.push((id, p.clone()));
                continue;
            }
            LevelSpec::Bicubic => write_level(&dir, set, |i| Ok(bicubic_upscale(&set.lr[i])?))?,
            LevelSpec::Hr => write_level(&dir, set, |i| Ok(set.hr[i].clone()))?,
            LevelSpec::Blur(s) => write_level(&dir, set, |i| Ok(gaussian_blur(&set.hr[i], *s)?))?,
            LevelSpec::Srresnet => {
                let g = srresnet.ok_or_else(|| {
                    ExpError::Config("level srresnet needs a pretrained generator".into())
                })?;
                write_level(&dir, set, |i| Ok(g.super_resolve(&set.lr[i])?))?
            }
        }
        out.push((id, dir));
    }
    Ok(out)
}

/// Builds the configured rank dataset from the HR images in `hr_dir`.
/// SR levels are labeled with NIQE under `niqe_model`.
pub fn build_rankset(
    cfg: &RankDataConfig,
    hr_dir: &Path,
    srresnet: Option<&Generator<f32>>,
    niqe_model: &NiqeModel,
    dataset_id: &str,
    seed: u64,
    out_dir: &Path,
) -> Result<RankDatasetManifest> {
    let opts = BuildOptions {
        dataset_id: dataset_id.into(),
        patch: cfg.patch,
        val_fraction: cfg.val_fraction,
        seed,
    };
    let manifest = match cfg.kind {
        RankSetKind::Distortion => build_distortion_rankset(
            hr_dir,
            &cfg.blur_sigmas,
            &cfg.noise_sigmas,
            &opts,
            &out_dir.join("levels"),
        )?,
        RankSetKind::Sr => {
            let set = PairedSet::load_dir(hr_dir)?;
            let levels =
                materialize_levels(&cfg.level_specs()?, &set, srresnet, &out_dir.join("levels"))?;
            let metric = NiqeMetric {
                model: niqe_model.clone(),
            };
            build_sr_rankset(&levels, LevelScores::Metric(&metric), cfg.strategy, &opts)?
        }
    };
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}
