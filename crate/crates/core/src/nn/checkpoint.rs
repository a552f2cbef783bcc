use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{BnRunning, NetworkState};
use super::params::Parameters;
use super::spec::NetworkSpec;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "neuroprint-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
const MANIFEST: &str = "model.json";
const BLOB: &str = "model.bin";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u32,
    spec: NetworkSpec,
    seed: u64,
    step: u64,
    blob: String,
    tensors: Vec<Entry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    name: String,
    shape: Vec<usize>,
}

fn entries(state: &NetworkState) -> Vec<(String, Vec<usize>, Vec<f64>)> {
    let mut out = Vec::new();
    for (prefix, p) in [("", &state.params), ("adam_m/", &state.adam_m), ("adam_v/", &state.adam_v)] {
        for (name, t) in p.tensors() {
            out.push((format!("{prefix}{name}"), t.shape().to_vec(), t.data().to_vec()));
        }
    }
    for (i, bn) in state.bn.iter().enumerate() {
        out.push((format!("bn{}_running_mean", i + 1), vec![bn.mean.len()], bn.mean.clone()));
        out.push((format!("bn{}_running_var", i + 1), vec![bn.var.len()], bn.var.clone()));
    }
    out
}

/// Writes `model.json` and `model.bin` into `dir`.
pub fn save_checkpoint(state: &NetworkState, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let items = entries(state);
    let mut blob = Vec::new();
    for (_, _, data) in &items {
        for v in data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = Manifest {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        spec: state.spec.clone(),
        seed: state.seed,
        step: state.step,
        blob: BLOB.into(),
        tensors: items
            .iter()
            .map(|(name, shape, _)| Entry {
                name: name.clone(),
                shape: shape.clone(),
            })
            .collect(),
    };
    let path = dir.join(MANIFEST);
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    let blob_path = dir.join(BLOB);
    fs::write(&blob_path, blob).map_err(|e| Error::io(&blob_path, e))
}

pub fn load_checkpoint(dir: &Path) -> Result<NetworkState> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    if manifest.format != CHECKPOINT_FORMAT || manifest.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint {} v{}",
            manifest.format, manifest.version
        )));
    }
    if manifest.blob.contains(['/', '\\']) {
        return Err(Error::Checkpoint(format!("invalid blob name {}", manifest.blob)));
    }
    let blob_path = dir.join(&manifest.blob);
    let bytes = fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Checkpoint("blob length is not a multiple of 8".into()));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();

    // rebuild the layout from the spec, then fill it in manifest order
    let mut state = super::network::build_network(&manifest.spec, manifest.seed)?;
    state.step = manifest.step;
    let expected = entries(&state);
    if expected.len() != manifest.tensors.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, manifest lists {}",
            expected.len(),
            manifest.tensors.len()
        )));
    }
    for ((name, shape, _), entry) in expected.iter().zip(&manifest.tensors) {
        if *name != entry.name || *shape != entry.shape {
            return Err(Error::Checkpoint(format!(
                "layout mismatch at {}: expected {name} {shape:?}",
                entry.name
            )));
        }
    }
    let total: usize = expected.iter().map(|(_, _, d)| d.len()).sum();
    if total != values.len() {
        return Err(Error::Checkpoint(format!(
            "blob holds {} values, layout needs {total}",
            values.len()
        )));
    }
    let mut offset = 0;
    let mut take = |t: &mut [f64]| {
        t.copy_from_slice(&values[offset..offset + t.len()]);
        offset += t.len();
    };
    for p in [&mut state.params, &mut state.adam_m, &mut state.adam_v] {
        fill(p, &mut take);
    }
    for bn in &mut state.bn {
        let BnRunning { mean, var } = bn;
        take(mean);
        take(var);
    }
    Ok(state)
}

fn fill(p: &mut Parameters, take: &mut impl FnMut(&mut [f64])) {
    for (_, t) in p.tensors_mut() {
        let t: &mut Tensor = t;
        take(t.data_mut());
    }
}
