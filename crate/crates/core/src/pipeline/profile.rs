use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Setup;
use crate::classifier::TrainConfig;
use crate::corpus::Subtask;

/// Training configuration per (subtask, setup) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperProfile {
    cells: BTreeMap<(Subtask, Setup), TrainConfig>,
}

impl HyperProfile {
    /// Shipped defaults: the paragraph-level subtask trains shorter and with
    /// fewer seeds on the larger merged and augmented sets.
    pub fn standard() -> Self {
        let mut cells = BTreeMap::new();
        for subtask in Subtask::ALL {
            for setup in Setup::ALL {
                let cfg = if subtask == Subtask::S3 && setup != Setup::Mono {
                    TrainConfig {
                        epochs: 5,
                        k_seeds: 5,
                        max_seq_len: 256,
                        batch_size: 8,
                        ..TrainConfig::default()
                    }
                } else {
                    TrainConfig {
                        epochs: 10,
                        k_seeds: 10,
                        max_seq_len: 512,
                        batch_size: 4,
                        ..TrainConfig::default()
                    }
                };
                cells.insert((subtask, setup), cfg);
            }
        }
        Self { cells }
    }

    pub fn get(&self, subtask: Subtask, setup: Setup) -> &TrainConfig {
        &self.cells[&(subtask, setup)]
    }

    /// Applies `ov` to every cell it matches.
    pub fn apply(&mut self, ov: &ProfileOverride) {
        for ((subtask, setup), cfg) in self.cells.iter_mut() {
            if ov.subtask.is_some_and(|s| s != *subtask) || ov.setup.is_some_and(|s| s != *setup) {
                continue;
            }
            if let Some(v) = ov.epochs {
                cfg.epochs = v;
            }
            if let Some(v) = ov.k_seeds {
                cfg.k_seeds = v;
            }
            if let Some(v) = ov.max_seq_len {
                cfg.max_seq_len = v;
            }
            if let Some(v) = ov.batch_size {
                cfg.batch_size = v;
            }
            if let Some(v) = ov.learning_rate {
                cfg.learning_rate = v;
            }
            if let Some(v) = ov.threshold_sweep {
                cfg.threshold_sweep = v;
            }
        }
    }

    pub fn with_overrides<'a>(overrides: impl IntoIterator<Item = &'a ProfileOverride>) -> Self {
        let mut p = Self::standard();
        for ov in overrides {
            p.apply(ov);
        }
        p
    }
}

impl Default for HyperProfile {
    fn default() -> Self {
        Self::standard()
    }
}

/// A partial training configuration applied to the matching profile cells;
/// an absent subtask or setup matches all.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtask: Option<Subtask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setup: Option<Setup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_seeds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_seq_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_sweep: Option<bool>,
}
