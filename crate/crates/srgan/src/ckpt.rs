use std::collections::BTreeMap;
use std::path::Path;

use ranksr_nn::{Adam, Checkpoint};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, Result, SrError};

pub const FORMAT_VERSION: &str = "1";

pub(crate) fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string(v).map_err(|e| SrError::Format(e.to_string()))
}

pub(crate) fn from_json<T: DeserializeOwned>(s: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| SrError::Format(e.to_string()))
}

pub(crate) fn expect_kind(ck: &Checkpoint, kind: &str) -> Result<()> {
    if ck.meta("format_version")? != FORMAT_VERSION {
        return Err(SrError::Format(format!(
            "unsupported format_version {}",
            ck.meta("format_version")?
        )));
    }
    if ck.meta("kind")? != kind {
        return Err(SrError::Format(format!(
            "expected a {kind} checkpoint, found {}",
            ck.meta("kind")?
        )));
    }
    Ok(())
}

pub(crate) fn header(kind: &str, iteration: u64) -> Checkpoint {
    let mut ck = Checkpoint::new();
    ck.set_meta("format_version", FORMAT_VERSION);
    ck.set_meta("kind", kind);
    ck.set_meta("iteration", iteration.to_string());
    ck
}

pub(crate) fn iteration(ck: &Checkpoint) -> Result<u64> {
    ck.meta("iteration")?
        .parse()
        .map_err(|_| SrError::Format("iteration is not an integer".into()))
}

pub fn save_generator(g: &Generator<f32>, iteration: u64, path: &Path) -> Result<()> {
    let mut ck = header("generator", iteration);
    ck.set_meta("config", to_json(&g.config)?);
    ck.insert_module("net", g);
    Ok(ck.save(path)?)
}

pub(crate) fn generator_from(ck: &Checkpoint, prefix: &str) -> Result<Generator<f32>> {
    let config: GeneratorConfig = from_json(ck.meta(&format!("{prefix}config"))?)?;
    let mut g = Generator::new(config, 0);
    ck.load_module(&format!("{prefix}net"), &mut g)?;
    Ok(g)
}

/// Loads a generator checkpoint, returning it with its training iteration.
pub fn load_generator(path: &Path) -> Result<(Generator<f32>, u64)> {
    let ck = Checkpoint::load(path)?;
    expect_kind(&ck, "generator")?;
    Ok((generator_from(&ck, "")?, iteration(&ck)?))
}

pub fn save_discriminator(d: &Discriminator<f32>, iteration: u64, path: &Path) -> Result<()> {
    let mut ck = header("discriminator", iteration);
    ck.set_meta("config", to_json(&d.config)?);
    ck.insert_module("net", d);
    Ok(ck.save(path)?)
}

pub fn load_discriminator(path: &Path) -> Result<(Discriminator<f32>, u64)> {
    let ck = Checkpoint::load(path)?;
    expect_kind(&ck, "discriminator")?;
    let config: DiscriminatorConfig = from_json(ck.meta("config")?)?;
    let mut d = Discriminator::new(config, 0);
    ck.load_module("net", &mut d)?;
    Ok((d, iteration(&ck)?))
}

pub(crate) fn insert_adam(ck: &mut Checkpoint, prefix: &str, opt: &Adam<f32>) {
    ck.set_meta(&format!("{prefix}.t"), opt.t.to_string());
    for (moment, map) in [("m", &opt.m), ("v", &opt.v)] {
        for (name, values) in map {
            ck.insert(
                &format!("{prefix}.{moment}.{name}"),
                vec![values.len()],
                values,
            );
        }
    }
}

pub(crate) fn load_adam(ck: &Checkpoint, prefix: &str, opt: &mut Adam<f32>) -> Result<()> {
    opt.t = ck
        .meta(&format!("{prefix}.t"))?
        .parse()
        .map_err(|_| SrError::Format("optimizer step".into()))?;
    let names: Vec<String> = ck.names().map(str::to_string).collect();
    for (moment, map) in [("m", &mut opt.m), ("v", &mut opt.v)] {
        let head = format!("{prefix}.{moment}.");
        let mut out = BTreeMap::new();
        for n in names.iter().filter(|n| n.starts_with(&head)) {
            out.insert(n[head.len()..].to_string(), ck.get::<f32>(n)?.1);
        }
        *map = out;
    }
    Ok(())
}
