//! Model files: `NCLM` magic, little-endian `u32` format version, `u64` length
//! of a JSON header (label space, featurizer, thresholds, parameter count),
//! the header, then every parameter as a little-endian `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassifierError, FeaturizerConfig, LinearModel, Result};
use crate::corpus::LabelSpace;

const MAGIC: &[u8; 4] = b"NCLM";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    kind: crate::corpus::LabelKind,
    label_space: LabelSpace,
    featurizer: FeaturizerConfig,
    threshold: f64,
    label_thresholds: Option<Vec<f64>>,
    n_params: u64,
}

pub fn model_to_bytes(model: &LinearModel) -> Vec<u8> {
    let header = serde_json::to_vec(&Header {
        kind: model.kind(),
        label_space: model.label_space.clone(),
        featurizer: model.featurizer.clone(),
        threshold: model.threshold,
        label_thresholds: model.label_thresholds.clone(),
        n_params: model.params.len() as u64,
    })
    .expect("model header serializes");
    let mut out = Vec::with_capacity(16 + header.len() + 8 * model.params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for p in &model.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<LinearModel> {
    let bad = |m: &str| ClassifierError::Format(m.to_string());
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(bad("missing NCLM magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(ClassifierError::Format(format!(
            "model format v{version}, this build reads v{FORMAT_VERSION}"
        )));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes
        .get(16..16usize.saturating_add(header_len))
        .ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(body)
        .map_err(|e| ClassifierError::Format(format!("bad header: {e}")))?;
    if header.kind != header.label_space.kind() {
        return Err(bad("header kind disagrees with label space"));
    }
    let expected = header.label_space.len() * (header.featurizer.hash_dim + 1);
    if header.n_params as usize != expected {
        return Err(bad("parameter count does not match label space and hash_dim"));
    }
    let data = &bytes[16 + header_len..];
    if data.len() != expected * 8 {
        return Err(ClassifierError::Format(format!(
            "expected {} parameter bytes, found {}",
            expected * 8,
            data.len()
        )));
    }
    if let Some(t) = &header.label_thresholds {
        if t.len() != header.label_space.len() {
            return Err(bad("per-label thresholds do not match label space"));
        }
    }
    let params = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(LinearModel {
        label_space: header.label_space,
        featurizer: header.featurizer,
        threshold: header.threshold,
        label_thresholds: header.label_thresholds,
        params,
    })
}

pub fn save_model(path: &Path, model: &LinearModel) -> Result<()> {
    fs::write(path, model_to_bytes(model)).map_err(|source| ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<LinearModel> {
    let bytes = fs::read(path).map_err(|source| ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_bytes(&bytes)
}
