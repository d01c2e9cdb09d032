use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PipelineError, Result, Setup};
use crate::classifier::{FeaturizerConfig, TrainConfig};
use crate::corpus::{Dataset, Subtask, TrainFraction};
use crate::metrics::Metric;

/// Version of every JSON record this module writes.
pub const SCHEMA_VERSION: u32 = 1;

/// One seed's training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub subtask: Subtask,
    pub language: String,
    pub setup: Setup,
    pub seed_index: usize,
    pub seed: u64,
    pub train_cfg: TrainConfig,
    pub featurizer: FeaturizerConfig,
    /// Model file, relative to the manifest's directory.
    pub model_path: Option<String>,
    pub metric: Metric,
    pub validation_score: Option<f64>,
    /// Dev-set score per language, filled in by setup selection.
    #[serde(default)]
    pub dev_scores: BTreeMap<String, f64>,
    pub epoch_losses: Vec<f64>,
    pub error: Option<String>,
    pub created_at: String,
    pub input_hash: String,
}

impl RunManifest {
    pub fn succeeded(&self) -> bool {
        self.error.is_none() && self.validation_score.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub schema_version: u32,
    pub subtask: Subtask,
    pub language: String,
    pub seed: u64,
    pub train_fraction: TrainFraction,
    pub n_train: usize,
    pub n_validation: usize,
    pub input_hash: String,
}

/// Outcome of a seed sweep; `best_manifest` is relative to the setup directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub schema_version: u32,
    pub subtask: Subtask,
    pub language: String,
    pub setup: Setup,
    pub k: usize,
    pub metric: Metric,
    pub validation_scores: Vec<Option<f64>>,
    pub best_index: usize,
    pub best_manifest: String,
}

/// The run chosen for a (subtask, language) pair. Paths are relative to the
/// work directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfficialManifest {
    pub schema_version: u32,
    pub subtask: Subtask,
    pub language: String,
    pub setup: Setup,
    /// True when the language had no training data and was routed to multi.
    pub surprise: bool,
    pub dev_scores: BTreeMap<Setup, f64>,
    pub run_manifest: String,
    pub predictions: String,
}

/// Hex SHA-256 of the canonical JSON encoding of `value`.
pub fn input_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("hash input serializes");
    hex::encode(Sha256::digest(bytes))
}

/// Hex SHA-256 over a dataset's identity: subtask, label space, languages and
/// every instance in order.
pub fn dataset_digest(dataset: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update(dataset.subtask().as_str().as_bytes());
    for l in dataset.label_space().labels() {
        h.update(b"\x1f");
        h.update(l.as_bytes());
    }
    for l in dataset.languages() {
        h.update(b"\x1e");
        h.update(l.as_bytes());
    }
    for inst in dataset.instances() {
        h.update(b"\x1d");
        h.update(inst.unit_id.as_bytes());
        h.update(b"\0");
        h.update(inst.text.as_bytes());
        for l in &inst.labels {
            h.update(b"\0");
            h.update(l.as_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Writes pretty JSON through a temporary file and a rename.
pub fn write_json_atomic<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value).expect("record serializes");
    body.push('\n');
    write_atomic(path, body.as_bytes())
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| PipelineError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| PipelineError::io(path, e))
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return text.len();
    }
    let start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

/// Reads a versioned JSON record. Syntax errors name the byte offset; a
/// `schema_version` other than [`SCHEMA_VERSION`] is a migration error.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    let parse_err = |e: serde_json::Error| PipelineError::ManifestParse {
        path: path.to_path_buf(),
        offset: byte_offset(&text, e.line(), e.column()),
        message: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(parse_err)?;
    if let Some(v) = value.get("schema_version") {
        let found = v.as_u64().unwrap_or(0) as u32;
        if found != SCHEMA_VERSION {
            return Err(PipelineError::Migration {
                path: path.to_path_buf(),
                found,
                expected: SCHEMA_VERSION,
            });
        }
    }
    // Re-parse from text rather than from `value` so floats stay bit-exact.
    serde_json::from_str(&text).map_err(parse_err)
}

/// Writes `manifest`. When the file already holds a manifest with the same
/// input hash, its creation time is kept so reruns are byte-identical.
pub fn persist_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let mut m = manifest.clone();
    if path.exists() {
        if let Ok(old) = read_json::<RunManifest>(path) {
            if old.input_hash == m.input_hash {
                m.created_at = old.created_at;
            }
        }
    }
    write_json_atomic(path, &m)
}

pub fn load_manifest(path: &Path) -> Result<RunManifest> {
    read_json(path)
}

pub(crate) fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
