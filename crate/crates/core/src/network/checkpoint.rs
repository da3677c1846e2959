//! Checkpoint format: `checkpoint.bin` holds every tensor as little-endian
//! f64 values back to back; `checkpoint.json` names them with shapes and
//! offsets and records the architecture, seed and a hash of the run config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ModelParams, NetworkConfig, ParamGroup};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "noisycan-checkpoint-v1";
const BIN_NAME: &str = "checkpoint.bin";
const MANIFEST_NAME: &str = "checkpoint.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into the value stream, in f64 elements.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub network: NetworkConfig,
    pub seed: u64,
    pub config_hash: String,
    pub tensors: Vec<TensorEntry>,
}

pub fn config_hash(config_json: &str) -> String {
    hex::encode(Sha256::digest(config_json.as_bytes()))
}

/// Writes `checkpoint.bin` and `checkpoint.json` into `dir`.
pub fn save_checkpoint(params: &ModelParams, dir: &Path, seed: u64, config_json: &str) -> Result<CheckpointManifest> {
    fs::create_dir_all(dir)?;
    let mut bytes = Vec::new();
    let mut tensors = Vec::new();
    let mut offset = 0;
    for (name, layer) in params.named_layers() {
        let w = layer.weights();
        tensors.push(TensorEntry {
            name: format!("{name}.weight"),
            shape: vec![w.rows(), w.cols()],
            offset,
        });
        offset += w.as_slice().len();
        tensors.push(TensorEntry {
            name: format!("{name}.bias"),
            shape: vec![layer.bias().len()],
            offset,
        });
        offset += layer.bias().len();
        for v in layer.values() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = CheckpointManifest {
        format: CHECKPOINT_FORMAT.to_string(),
        network: params.config().clone(),
        seed,
        config_hash: config_hash(config_json),
        tensors,
    };
    fs::write(dir.join(BIN_NAME), bytes)?;
    fs::write(dir.join(MANIFEST_NAME), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Reads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(dir: &Path) -> Result<(ModelParams, CheckpointManifest)> {
    let manifest_path = dir.join(MANIFEST_NAME);
    let bin_path = dir.join(BIN_NAME);
    let manifest: CheckpointManifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
    let fail = |path: &PathBuf, msg: String| Error::Format {
        path: path.clone(),
        msg,
    };
    if manifest.format != CHECKPOINT_FORMAT {
        return Err(fail(&manifest_path, format!("unknown format `{}`", manifest.format)));
    }
    let bytes = fs::read(&bin_path)?;
    if bytes.len() % 8 != 0 {
        return Err(fail(
            &bin_path,
            format!("{} bytes is not a whole number of f64", bytes.len()),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();

    let mut params = ModelParams::new(manifest.network.clone(), manifest.seed)?;
    let expected: usize = ParamGroup::ALL.iter().map(|&g| params.param_count(g)).sum();
    if values.len() != expected {
        return Err(fail(
            &bin_path,
            format!(
                "expected {expected} values for the recorded network, found {}",
                values.len()
            ),
        ));
    }
    let names: Vec<String> = params.named_layers().into_iter().map(|(n, _)| n).collect();
    let layers = params.all_layers_mut();
    for (name, layer) in names.iter().zip(layers) {
        for (suffix, len) in [("weight", layer.in_dim() * layer.out_dim()), ("bias", layer.out_dim())] {
            let key = format!("{name}.{suffix}");
            let entry = manifest
                .tensors
                .iter()
                .find(|t| t.name == key)
                .ok_or_else(|| fail(&manifest_path, format!("missing tensor `{key}`")))?;
            if entry.shape.iter().product::<usize>() != len || entry.offset + len > values.len() {
                return Err(fail(
                    &manifest_path,
                    format!("tensor `{key}` has wrong shape or offset"),
                ));
            }
            let src = &values[entry.offset..entry.offset + len];
            if src.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(key));
            }
            let dst = if suffix == "weight" {
                layer.weights_mut().as_mut_slice()
            } else {
                layer.bias_mut()
            };
            dst.copy_from_slice(src);
        }
    }
    Ok((params, manifest))
}
