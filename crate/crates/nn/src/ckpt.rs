use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use safetensors::tensor::TensorView;
use safetensors::{Dtype, SafeTensors};

use crate::{Float, Module, NnError};

type Result<T> = std::result::Result<T, NnError>;

#[derive(Debug, Clone, PartialEq)]
struct Stored {
    dtype: Dtype,
    shape: Vec<usize>,
    bytes: Vec<u8>,
}

/// Named tensors plus string metadata, persisted as a safetensors file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub metadata: BTreeMap<String, String>,
    tensors: BTreeMap<String, Stored>,
}

fn encode<F: Float>(values: &[F]) -> Vec<u8> {
    let mut out = Vec::with_capacity(std::mem::size_of_val(values));
    values.iter().for_each(|v| v.to_le(&mut out));
    out
}

fn decode<F: Float>(s: &Stored) -> Result<Vec<F>> {
    Ok(match s.dtype {
        Dtype::F32 => s
            .bytes
            .chunks_exact(4)
            .map(|b| F::of(<f32 as Float>::from_le(b) as f64))
            .collect(),
        Dtype::F64 => s
            .bytes
            .chunks_exact(8)
            .map(|b| F::of(<f64 as Float>::from_le(b)))
            .collect(),
        other => return Err(NnError::Format(format!("unsupported dtype {other:?}"))),
    })
}

/// Rewrites the JSON header with sorted keys so equal checkpoints produce
/// equal bytes; the serializer emits metadata in hash order.
fn canonical_header(bytes: &[u8]) -> Result<Vec<u8>> {
    let bad = |m: &str| NnError::Format(format!("safetensors header: {m}"));
    let len = u64::from_le_bytes(
        bytes
            .get(..8)
            .ok_or_else(|| bad("truncated"))?
            .try_into()
            .unwrap(),
    ) as usize;
    let header = bytes.get(8..8 + len).ok_or_else(|| bad("truncated"))?;
    let mut value: BTreeMap<String, serde_json::Value> =
        serde_json::from_slice(header).map_err(|e| bad(&e.to_string()))?;
    if let Some(meta) = value.get_mut("__metadata__") {
        let sorted: BTreeMap<String, serde_json::Value> =
            serde_json::from_value(meta.take()).map_err(|e| bad(&e.to_string()))?;
        *meta = serde_json::to_value(sorted).map_err(|e| bad(&e.to_string()))?;
    }
    let mut json = serde_json::to_vec(&value).map_err(|e| bad(&e.to_string()))?;
    json.resize(json.len().div_ceil(8) * 8, b' ');
    let mut out = Vec::with_capacity(8 + json.len() + bytes.len() - 8 - len);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&bytes[8 + len..]);
    Ok(out)
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<String>) {
        self.metadata.insert(key.to_string(), value.into());
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.metadata
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| NnError::MissingMeta(key.to_string()))
    }

    pub fn insert<F: Float>(&mut self, name: &str, shape: Vec<usize>, values: &[F]) {
        assert_eq!(
            shape.iter().product::<usize>(),
            values.len(),
            "checkpoint tensor shape"
        );
        self.tensors.insert(
            name.to_string(),
            Stored {
                dtype: F::DTYPE,
                shape,
                bytes: encode(values),
            },
        );
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn get<F: Float>(&self, name: &str) -> Result<(Vec<usize>, Vec<F>)> {
        let s = self
            .tensors
            .get(name)
            .ok_or_else(|| NnError::Missing(name.to_string()))?;
        Ok((s.shape.clone(), decode(s)?))
    }

    /// Stores every parameter and buffer of `m` under `prefix`.
    pub fn insert_module<F: Float>(&mut self, prefix: &str, m: &dyn Module<F>) {
        m.visit(prefix, &mut |name, p| {
            self.insert(name, p.shape.clone(), &p.value)
        });
    }

    /// Overwrites the parameters and buffers of `m` from tensors under `prefix`.
    pub fn load_module<F: Float>(&self, prefix: &str, m: &mut dyn Module<F>) -> Result<()> {
        let mut err = None;
        m.visit_mut(prefix, &mut |name, p| {
            if err.is_some() {
                return;
            }
            match self.get::<F>(name) {
                Ok((shape, values)) if shape == p.shape => p.value = values,
                Ok((shape, _)) => {
                    err = Some(NnError::Shape {
                        name: name.to_string(),
                        expected: p.shape.clone(),
                        got: shape,
                    })
                }
                Err(e) => err = Some(e),
            }
        });
        err.map_or(Ok(()), Err)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let views: Vec<(String, TensorView<'_>)> = self
            .tensors
            .iter()
            .map(|(k, s)| {
                TensorView::new(s.dtype, s.shape.clone(), &s.bytes)
                    .map(|v| (k.clone(), v))
                    .map_err(|e| NnError::Format(e.to_string()))
            })
            .collect::<Result<_>>()?;
        let meta: HashMap<String, String> = self.metadata.clone().into_iter().collect();
        let bytes = safetensors::serialize(views, Some(meta))
            .map_err(|e| NnError::Format(e.to_string()))?;
        canonical_header(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (_, header) =
            SafeTensors::read_metadata(bytes).map_err(|e| NnError::Format(e.to_string()))?;
        let st = SafeTensors::deserialize(bytes).map_err(|e| NnError::Format(e.to_string()))?;
        let metadata = header
            .metadata()
            .clone()
            .unwrap_or_default()
            .into_iter()
            .collect();
        let tensors = st
            .tensors()
            .into_iter()
            .map(|(k, v)| {
                (
                    k,
                    Stored {
                        dtype: v.dtype(),
                        shape: v.shape().to_vec(),
                        bytes: v.data().to_vec(),
                    },
                )
            })
            .collect();
        Ok(Self { metadata, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| NnError::Io {
                path: dir.to_path_buf(),
                source: e,
            })?;
        }
        let tmp = path.with_extension("partial");
        std::fs::write(&tmp, bytes).map_err(|e| NnError::Io {
            path: tmp.clone(),
            source: e,
        })?;
        std::fs::rename(&tmp, path).map_err(|e| NnError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| NnError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_bytes(&bytes)
    }
}
