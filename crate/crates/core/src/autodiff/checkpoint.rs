//! Parameter checkpoints: a JSON manifest next to a flat little-endian `f64`
//! payload (`<path>.bin`).

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::IxDyn;
use serde::{Deserialize, Serialize};

use super::{AdError, Array, ParamStore};

pub const CHECKPOINT_FORMAT: &str = "qgst-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

/// Checkpoint manifest. `meta` carries caller data such as the model config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub tensors: Vec<TensorEntry>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

fn bin_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".bin");
    PathBuf::from(s)
}

pub fn save_checkpoint(path: &Path, store: &ParamStore, meta: serde_json::Value) -> Result<(), AdError> {
    let mut tensors = Vec::with_capacity(store.len());
    let mut bytes = Vec::with_capacity(store.n_scalars() * 8);
    let mut offset = 0;
    for (name, value) in store.iter() {
        tensors.push(TensorEntry { name: name.to_string(), shape: value.shape().to_vec(), offset });
        for x in value.iter() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        offset += value.len();
    }
    let ckpt = Checkpoint { format: CHECKPOINT_FORMAT.into(), version: CHECKPOINT_VERSION, tensors, meta };
    fs::write(path, serde_json::to_vec_pretty(&ckpt)?)?;
    fs::write(bin_path(path), bytes)?;
    Ok(())
}

/// Reads a checkpoint. When `expect` is given, names and shapes must match it exactly.
pub fn load_checkpoint(path: &Path, expect: Option<&ParamStore>) -> Result<(ParamStore, serde_json::Value), AdError> {
    let ckpt: Checkpoint = serde_json::from_slice(&fs::read(path)?)?;
    if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
        return Err(AdError::Checkpoint(format!("unsupported format {} v{}", ckpt.format, ckpt.version)));
    }
    let bytes = fs::read(bin_path(path))?;
    if bytes.len() % 8 != 0 {
        return Err(AdError::Checkpoint("payload length is not a multiple of 8".into()));
    }
    let data: Vec<f64> =
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let mut store = ParamStore::new();
    for t in &ckpt.tensors {
        let n: usize = t.shape.iter().product();
        let chunk = data
            .get(t.offset..t.offset + n)
            .ok_or_else(|| AdError::Checkpoint(format!("tensor {} runs past payload", t.name)))?;
        store.insert(&t.name, Array::from_shape_vec(IxDyn(&t.shape), chunk.to_vec()).expect("sized"));
    }
    if let Some(expect) = expect {
        if expect.names() != store.names() {
            return Err(AdError::Checkpoint(format!(
                "parameter names differ: expected {:?}, found {:?}",
                expect.names(),
                store.names()
            )));
        }
        for (name, v) in expect.iter() {
            let found = store.value(name)?.shape();
            if v.shape() != found {
                return Err(AdError::Checkpoint(format!("{name}: expected shape {:?}, found {found:?}", v.shape())));
            }
        }
    }
    Ok((store, ckpt.meta))
}
