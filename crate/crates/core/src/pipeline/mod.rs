//! Experiment orchestration: seed sweeps per setup, validation-based seed
//! selection, dev-based setup selection, surprise-language routing, manifests,
//! prediction files and leaderboard-style reports.

mod config;
mod experiment;
mod manifest;
mod predict;
mod profile;
mod report;
mod select;
mod sweep;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::AugmentError;
use crate::backend::BackendError;
use crate::classifier::ClassifierError;
use crate::corpus::{CorpusError, Subtask};
use crate::metrics::MetricsError;

pub use config::{ExperimentConfig, PathsConfig, BackendConfig, DEFAULT_ROOT_SEED};
pub use experiment::{
    evaluate_files, load_results, report_rows, run_experiment, stage_augment, stage_predict, stage_select,
    stage_split, stage_sweep, ExperimentSummary, Layout, ResultRecord, MULTI_LANGUAGE,
};
pub use manifest::{
    input_hash, load_manifest, persist_manifest, read_json, write_json_atomic, OfficialManifest,
    RunManifest, SplitManifest, SweepSummary, SCHEMA_VERSION,
};
pub use predict::{produce_predictions, Predictor, RemotePredictor};
pub use profile::{HyperProfile, ProfileOverride};
pub use report::{parse_reference_rows, render_report, ReportFormat, ReportRow};
pub use select::{route_language, select_setup, Route};
pub use sweep::{
    run_seed_sweep, seed_dir, SweepData, SweepOutcome, MANIFEST_FILE, MODEL_FILE, SWEEP_FILE,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: parse error at byte {offset}: {message}", path.display())]
    ManifestParse {
        path: PathBuf,
        offset: usize,
        message: String,
    },
    #[error("{}: schema v{found} needs migration to v{expected}", path.display())]
    Migration {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("all {} seeds failed for {subtask}/{language}/{setup}: {}", errors.len(), errors.join("; "))]
    AllSeedsFailed {
        subtask: Subtask,
        language: String,
        setup: Setup,
        errors: Vec<String>,
    },
    #[error("inference failed on unit {unit}: {message}; no predictions written")]
    Inference { unit: String, message: String },
    #[error("{0}")]
    Selection(String),
    #[error("missing prerequisite: {0}")]
    Missing(String),
}

impl PipelineError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for problems with inputs or configuration, as opposed to failures
    /// while training or serving models.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            PipelineError::Config(_)
                | PipelineError::Corpus(_)
                | PipelineError::Metrics(_)
                | PipelineError::Io { .. }
                | PipelineError::ManifestParse { .. }
                | PipelineError::Migration { .. }
                | PipelineError::Selection(_)
                | PipelineError::Missing(_)
                | PipelineError::Augment(AugmentError::Plan(_) | AugmentError::Lexicon(_))
                | PipelineError::Classifier(ClassifierError::Config(_))
        )
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

/// Training regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setup {
    Mono,
    Multi,
    Aug,
}

impl Setup {
    pub const ALL: [Setup; 3] = [Setup::Mono, Setup::Multi, Setup::Aug];

    /// Preference among setups with equal dev scores, most preferred first.
    pub const TIE_ORDER: [Setup; 3] = [Setup::Multi, Setup::Mono, Setup::Aug];

    pub fn as_str(self) -> &'static str {
        match self {
            Setup::Mono => "mono",
            Setup::Multi => "multi",
            Setup::Aug => "aug",
        }
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setup {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mono" | "monolingual" => Ok(Setup::Mono),
            "multi" | "multilingual" => Ok(Setup::Multi),
            "aug" | "augmented" | "augmentation" => Ok(Setup::Aug),
            other => Err(PipelineError::Config(format!("unknown setup {other:?}"))),
        }
    }
}
