//! Built-in text classifier: hashed word n-grams feeding a linear head
//! (softmax for multiclass, independent sigmoids for multilabel) trained with
//! Adam.

mod adam;
mod features;
mod io;
mod loss;
mod model;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use features::{featurize, tokenize, FeaturizerConfig, SparseVector};
pub use io::{load_model, model_from_bytes, model_to_bytes, save_model};
pub use loss::{loss_and_gradient, Example};
pub use model::{predict_multiclass, predict_multilabel, LinearModel};
pub use train::{train, tune_thresholds, TrainOutcome};

/// Learning rate for fine-tuning pretrained transformer checkpoints through a
/// classification backend.
pub const FINETUNE_LEARNING_RATE: f64 = 2e-5;

/// Default learning rate of the built-in linear model. A fine-tuning rate is
/// far too small to move a freshly initialised linear head in a few epochs.
pub const LINEAR_LEARNING_RATE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("model is {found}, operation needs {expected}")]
    KindMismatch {
        expected: crate::corpus::LabelKind,
        found: crate::corpus::LabelKind,
    },
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
}

pub type Result<T, E = ClassifierError> = std::result::Result<T, E>;

fn default_epochs() -> usize {
    10
}
fn default_k() -> usize {
    10
}
fn default_len() -> usize {
    512
}
fn default_batch() -> usize {
    4
}
fn default_lr() -> f64 {
    LINEAR_LEARNING_RATE
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

/// Training hyperparameters of one seed's run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_k")]
    pub k_seeds: usize,
    /// Token truncation length.
    #[serde(default = "default_len")]
    pub max_seq_len: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_eps")]
    pub adam_epsilon: f64,
    /// Tune one decision threshold per label on validation data (multilabel).
    #[serde(default)]
    pub threshold_sweep: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            k_seeds: default_k(),
            max_seq_len: default_len(),
            batch_size: default_batch(),
            learning_rate: default_lr(),
            adam_beta1: default_beta1(),
            adam_beta2: default_beta2(),
            adam_epsilon: default_eps(),
            threshold_sweep: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs),
            ("k_seeds", self.k_seeds),
            ("max_seq_len", self.max_seq_len),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ClassifierError::Config(format!("{name} must be positive")));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ClassifierError::Config("learning_rate must be positive".into()));
        }
        self.adam().validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }
}
