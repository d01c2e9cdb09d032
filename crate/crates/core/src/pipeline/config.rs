use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{HyperProfile, PipelineError, ProfileOverride, Result, Setup};
use crate::augment::AugmentPlan;
use crate::backend::Registry;
use crate::classifier::FeaturizerConfig;
use crate::corpus::{load_label_space, official_label_space, LabelSpace, Subtask, TrainFraction};
use crate::synth::{SURPRISE_LANGUAGES, TRAINING_LANGUAGES};

pub const DEFAULT_ROOT_SEED: u64 = 20230301;

fn default_root_seed() -> u64 {
    DEFAULT_ROOT_SEED
}
fn default_languages() -> Vec<String> {
    TRAINING_LANGUAGES.iter().map(|s| s.to_string()).collect()
}
fn default_surprise() -> Vec<String> {
    SURPRISE_LANGUAGES.iter().map(|s| s.to_string()).collect()
}
fn default_subtasks() -> Vec<Subtask> {
    Subtask::ALL.to_vec()
}
fn default_setups() -> Vec<Setup> {
    Setup::ALL.to_vec()
}
fn default_team() -> String {
    "newsclass".into()
}
fn default_timeout_ms() -> u64 {
    30_000
}
fn default_remote_threshold() -> f64 {
    0.5
}

/// Where inputs are read and outputs written. Relative paths are resolved
/// against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Holds `<lang>/{train,dev,test}-articles-subtask-<N>/` and
    /// `<lang>/{train,dev,test}-labels-subtask-<N>.txt`.
    pub data_dir: PathBuf,
    pub work_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registry: Option<PathBuf>,
    /// Label inventories; the bundled shared-task inventories are used for
    /// subtasks not listed.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub label_spaces: BTreeMap<Subtask, PathBuf>,
}

/// External backend process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Produce test predictions with the backend's `classify` instead of the
    /// selected linear model.
    #[serde(default)]
    pub classify: bool,
    #[serde(default = "default_remote_threshold")]
    pub threshold: f64,
}

impl BackendConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_root_seed")]
    pub root_seed: u64,
    /// Languages with training data.
    #[serde(default = "default_languages")]
    pub languages: Vec<String>,
    /// Test-only languages, served by the multilingual model.
    #[serde(default = "default_surprise")]
    pub surprise_languages: Vec<String>,
    #[serde(default = "default_subtasks")]
    pub subtasks: Vec<Subtask>,
    #[serde(default = "default_setups")]
    pub setups: Vec<Setup>,
    /// Run names are `<team>_<setup>`.
    #[serde(default = "default_team")]
    pub team: String,
    #[serde(default)]
    pub train_fraction: TrainFraction,
    pub paths: PathsConfig,
    #[serde(default)]
    pub featurizer: FeaturizerConfig,
    /// Augmentation plan; its seed is replaced by one derived per language.
    #[serde(default)]
    pub augment: AugmentPlan,
    #[serde(default, rename = "profile", skip_serializing_if = "Vec::is_empty")]
    pub profile_overrides: Vec<ProfileOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendConfig>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    /// A config with defaults everywhere except the two required paths.
    pub fn new(data_dir: impl Into<PathBuf>, work_dir: impl Into<PathBuf>) -> Self {
        Self {
            root_seed: DEFAULT_ROOT_SEED,
            languages: default_languages(),
            surprise_languages: default_surprise(),
            subtasks: default_subtasks(),
            setups: default_setups(),
            team: default_team(),
            train_fraction: TrainFraction::default(),
            paths: PathsConfig {
                data_dir: data_dir.into(),
                work_dir: work_dir.into(),
                lexicon: None,
                registry: None,
                label_spaces: BTreeMap::new(),
            },
            featurizer: FeaturizerConfig::default(),
            augment: AugmentPlan::default(),
            profile_overrides: Vec::new(),
            backend: None,
            base_dir: PathBuf::from("."),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut cfg = Self::parse(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(cfg)
    }

    /// Parses and validates TOML text; relative paths stay relative to the
    /// current directory.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg: Self =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.base_dir = PathBuf::from(".");
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(PipelineError::Config(m));
        if self.languages.is_empty() {
            return err("no training languages".into());
        }
        let mut seen = BTreeSet::new();
        for l in self.languages.iter().chain(&self.surprise_languages) {
            if l.is_empty() || !l.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return err(format!("bad language code {l:?}"));
            }
            if l == super::MULTI_LANGUAGE || l == "official" {
                return err(format!("language code {l:?} is reserved"));
            }
            if !seen.insert(l) {
                return err(format!("language {l:?} listed twice"));
            }
        }
        if self.subtasks.is_empty() {
            return err("no subtasks".into());
        }
        if self.setups.is_empty() {
            return err("no setups".into());
        }
        if !self.surprise_languages.is_empty() && !self.setups.contains(&Setup::Multi) {
            return err("surprise languages need the multi setup".into());
        }
        if self.team.is_empty() || self.team.contains(char::is_whitespace) {
            return err(format!("bad team name {:?}", self.team));
        }
        self.featurizer.validate()?;
        if self.setups.contains(&Setup::Aug) {
            self.augment.validate()?;
            if self.augment.needs_lexicon() && self.paths.lexicon.is_none() {
                return err("augment plan uses synonym_replace but paths.lexicon is unset".into());
            }
            if self.augment.needs_backend() && self.backend.is_none() {
                return err("augment plan uses contextual ops but [backend] is unset".into());
            }
        }
        if let Some(b) = &self.backend {
            if b.command.is_empty() || b.timeout_ms == 0 {
                return err("backend needs a command and a positive timeout".into());
            }
        }
        let profile = self.profile();
        for &st in &self.subtasks {
            for &setup in &self.setups {
                profile.get(st, setup).validate()?;
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.resolve(&self.paths.data_dir)
    }

    pub fn work_dir(&self) -> PathBuf {
        self.resolve(&self.paths.work_dir)
    }

    pub fn profile(&self) -> HyperProfile {
        HyperProfile::with_overrides(&self.profile_overrides)
    }

    pub fn label_space(&self, subtask: Subtask) -> Result<LabelSpace> {
        match self.paths.label_spaces.get(&subtask) {
            Some(p) => {
                let space = load_label_space(&self.resolve(p))?;
                if space.subtask() != subtask {
                    return Err(PipelineError::Config(format!(
                        "label space {} is for {}, not {subtask}",
                        p.display(),
                        space.subtask()
                    )));
                }
                Ok(space)
            }
            None => Ok(official_label_space(subtask)),
        }
    }

    pub fn registry(&self) -> Result<Registry> {
        Ok(match &self.paths.registry {
            Some(p) => Registry::load(&self.resolve(p))?,
            None => Registry::default(),
        })
    }

    pub fn is_training_language(&self, lang: &str) -> bool {
        self.languages.iter().any(|l| l == lang)
    }

    pub fn all_languages(&self) -> impl Iterator<Item = &String> {
        self.languages.iter().chain(&self.surprise_languages)
    }

    pub fn run_name(&self, setup: Setup) -> String {
        format!("{}_{setup}", self.team)
    }
}
