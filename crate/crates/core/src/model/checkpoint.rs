//! Parameter checkpoints: one JSON header line, then every parameter as
//! little-endian `f64` in header order.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::cnn::Cnn;
use super::config::ArchitectureConfig;
use super::fusion::CombinationRule;
use super::ncnn::{Classifier, ModelKind, NcnnModel};
use super::{ModelError, Result};
use crate::neutrosophic::NsWindow;
use crate::tensor::Tensor;

pub const FORMAT: &str = "ncnn-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub path: String,
    pub layer: usize,
    pub role: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub kind: ModelKind,
    pub seed: u64,
    pub iterations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<CombinationRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ns_window: Option<NsWindow>,
    pub architecture: ArchitectureConfig,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone)]
pub struct LoadedCheckpoint {
    pub model: Classifier,
    pub header: CheckpointHeader,
    /// Hex SHA-256 of the file bytes.
    pub digest: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn entries(model: &Classifier) -> Vec<TensorEntry> {
    let mut out = Vec::new();
    for (name, path) in model.paths() {
        let weighted = path
            .config()
            .layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.op.has_params())
            .map(|(i, _)| i + 1);
        for (layer, pair) in weighted.zip(path.params().chunks(2)) {
            for (role, t) in ["weights", "bias"].into_iter().zip(pair) {
                out.push(TensorEntry {
                    path: name.into(),
                    layer,
                    role: role.into(),
                    shape: t.shape().to_vec(),
                });
            }
        }
    }
    out
}

pub fn encode_checkpoint(model: &Classifier, iterations: u64) -> Vec<u8> {
    let header = CheckpointHeader {
        format: FORMAT.into(),
        kind: model.kind(),
        seed: model.seed(),
        iterations,
        rule: model.rule(),
        ns_window: model.ns_window(),
        architecture: model.config().clone(),
        tensors: entries(model),
    };
    let mut bytes = serde_json::to_vec(&header).expect("header serializes");
    bytes.push(b'\n');
    for t in model.params() {
        for v in t.values() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(Classifier, CheckpointHeader)> {
    let bad = |m: String| ModelError::Checkpoint(m);
    let nl = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| bad("missing header line".into()))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| bad(format!("bad header: {e}")))?;
    if header.format != FORMAT {
        return Err(bad(format!("unsupported format {:?}", header.format)));
    }
    let payload = &bytes[nl + 1..];
    let total: usize = header.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
    if payload.len() != total * 8 {
        return Err(bad(format!("payload has {} bytes, header needs {}", payload.len(), total * 8)));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut by_path: Vec<(String, Vec<Tensor>)> = Vec::new();
    for e in &header.tensors {
        let n = e.shape.iter().product();
        let t = Tensor::new(e.shape.clone(), values.by_ref().take(n).collect())?;
        match by_path.last_mut() {
            Some((p, ts)) if *p == e.path => ts.push(t),
            _ => by_path.push((e.path.clone(), vec![t])),
        }
    }
    let arch = &header.architecture;
    let mut paths = by_path.into_iter();
    let mut next_path = |name: &str| -> Result<Cnn> {
        match paths.next() {
            Some((p, ts)) if p == name => Cnn::from_params(arch, header.seed, ts),
            _ => Err(bad(format!("missing {name} path"))),
        }
    };
    let model = match header.kind {
        ModelKind::Cnn => Classifier::Cnn(next_path("spectrogram")?),
        ModelKind::Ncnn => {
            let path_spec = next_path("spectrogram")?;
            let path_ind = next_path("indeterminacy")?;
            Classifier::Ncnn(NcnnModel {
                path_spec,
                path_ind,
                rule: header.rule.ok_or_else(|| bad("two-path checkpoint without rule".into()))?,
                ns_window: header
                    .ns_window
                    .ok_or_else(|| bad("two-path checkpoint without window".into()))?,
            })
        }
    };
    Ok((model, header))
}

/// Writes the checkpoint and returns its SHA-256.
pub fn save_checkpoint(path: &Path, model: &Classifier, iterations: u64) -> Result<String> {
    let bytes = encode_checkpoint(model, iterations);
    let io = |source| ModelError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(&bytes).map_err(io)?;
    Ok(sha256_hex(&bytes))
}

pub fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint> {
    let bytes = std::fs::read(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let (model, header) = decode_checkpoint(&bytes)?;
    Ok(LoadedCheckpoint {
        model,
        header,
        digest: sha256_hex(&bytes),
    })
}
