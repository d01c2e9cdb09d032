//! Article and label parsing, per-subtask datasets, splits and merges.
//!
//! Articles live in `article<ID>.txt` files whose paragraphs are separated by
//! blank lines. Gold labels are tab-separated: `article_id<TAB>labels` for the
//! article-level subtasks and `article_id<TAB>paragraph<TAB>labels` for the
//! paragraph-level one, with comma-separated label lists.

mod dataset;
mod document;
mod labels;
mod layout;

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{bind, merge_multilingual, split, units, Bound, SplitConfig, TrainFraction, Unit};
pub use document::{paragraphs_of, parse_documents, write_document, Document};
pub use labels::{
    load_label_space, official_label_space, parse_label_space, parse_labels, parse_labels_str, render_labels, write_label_space,
    write_labels, LabelMap,
};
pub use layout::{read_dataset, write_dataset};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("article {id} is empty ({})", path.display())]
    EmptyArticle { id: String, path: PathBuf },
    #[error("{}:{line}: unknown label {label:?}", path.display())]
    UnknownLabel {
        path: PathBuf,
        line: usize,
        label: String,
    },
    #[error("{}:{line}: {message}", path.display())]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{} label space: expected {expected} labels, found {found}", subtask)]
    LabelCount {
        subtask: Subtask,
        expected: usize,
        found: usize,
    },
    #[error("validation error: {0}")]
    Validation(String),
}

impl CorpusError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// The three shared-task subtasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Subtask {
    /// News genre: opinion, reporting or satire.
    S1,
    /// Framing dimensions.
    S2,
    /// Persuasion techniques per paragraph.
    S3,
}

impl Subtask {
    pub const ALL: [Subtask; 3] = [Subtask::S1, Subtask::S2, Subtask::S3];

    pub fn number(self) -> u8 {
        match self {
            Subtask::S1 => 1,
            Subtask::S2 => 2,
            Subtask::S3 => 3,
        }
    }

    pub fn kind(self) -> LabelKind {
        match self {
            Subtask::S1 => LabelKind::Multiclass,
            Subtask::S2 | Subtask::S3 => LabelKind::Multilabel,
        }
    }

    /// Size of the official label inventory.
    pub fn label_count(self) -> usize {
        match self {
            Subtask::S1 => 3,
            Subtask::S2 => 14,
            Subtask::S3 => 23,
        }
    }

    /// Whether instances are paragraphs rather than whole articles.
    pub fn is_paragraph_level(self) -> bool {
        self == Subtask::S3
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Subtask::S1 => "subtask1",
            Subtask::S2 => "subtask2",
            Subtask::S3 => "subtask3",
        }
    }
}

impl fmt::Display for Subtask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subtask {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let digit = lower
            .strip_prefix("subtask")
            .map(|rest| rest.trim_start_matches(['-', '_']))
            .or_else(|| lower.strip_prefix('s'))
            .unwrap_or(&lower);
        match digit {
            "1" => Ok(Subtask::S1),
            "2" => Ok(Subtask::S2),
            "3" => Ok(Subtask::S3),
            _ => Err(CorpusError::Validation(format!("unknown subtask {s:?}"))),
        }
    }
}

impl TryFrom<String> for Subtask {
    type Error = CorpusError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Subtask> for String {
    fn from(s: Subtask) -> String {
        s.as_str().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Multiclass,
    Multilabel,
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelKind::Multiclass => "multiclass",
            LabelKind::Multilabel => "multilabel",
        })
    }
}

impl FromStr for LabelKind {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "multiclass" => Ok(LabelKind::Multiclass),
            "multilabel" => Ok(LabelKind::Multilabel),
            other => Err(CorpusError::Validation(format!("unknown label kind {other:?}"))),
        }
    }
}

/// Ordered label inventory of one subtask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLabelSpace")]
pub struct LabelSpace {
    subtask: Subtask,
    kind: LabelKind,
    labels: Vec<String>,
}

#[derive(Deserialize)]
struct RawLabelSpace {
    subtask: Subtask,
    kind: LabelKind,
    labels: Vec<String>,
}

impl TryFrom<RawLabelSpace> for LabelSpace {
    type Error = CorpusError;

    fn try_from(raw: RawLabelSpace) -> Result<Self> {
        LabelSpace::custom(raw.subtask, raw.kind, raw.labels)
    }
}

impl LabelSpace {
    /// Validates kind and cardinality against the subtask and label uniqueness.
    pub fn new(subtask: Subtask, kind: LabelKind, labels: Vec<String>) -> Result<Self> {
        if kind != subtask.kind() {
            return Err(CorpusError::Validation(format!(
                "{subtask} is {}, not {kind}",
                subtask.kind()
            )));
        }
        if labels.len() != subtask.label_count() {
            return Err(CorpusError::LabelCount {
                subtask,
                expected: subtask.label_count(),
                found: labels.len(),
            });
        }
        Self::check_labels(&labels)?;
        Ok(Self {
            subtask,
            kind,
            labels,
        })
    }

    /// Builds a label space of arbitrary size. Intended for scoring and model
    /// code exercised on toy inventories; pipeline inputs go through [`new`].
    ///
    /// [`new`]: LabelSpace::new
    pub fn custom(subtask: Subtask, kind: LabelKind, labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(CorpusError::Validation("label space is empty".into()));
        }
        Self::check_labels(&labels)?;
        Ok(Self {
            subtask,
            kind,
            labels,
        })
    }

    fn check_labels(labels: &[String]) -> Result<()> {
        let mut seen = BTreeSet::new();
        for label in labels {
            if label.is_empty() || label.contains([',', '\t', '\n']) || label.trim() != label {
                return Err(CorpusError::Validation(format!(
                    "label {label:?} is empty or contains a separator"
                )));
            }
            if !seen.insert(label.as_str()) {
                return Err(CorpusError::Validation(format!("duplicate label {label:?}")));
            }
        }
        Ok(())
    }

    pub fn subtask(&self) -> Subtask {
        self.subtask
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }
}

/// One classification unit: an article (subtasks 1 and 2) or a paragraph
/// (subtask 3).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub unit_id: String,
    pub text: String,
    pub labels: BTreeSet<String>,
}

impl LabeledInstance {
    pub fn new<I, S>(unit_id: impl Into<String>, text: impl Into<String>, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            unit_id: unit_id.into(),
            text: text.into(),
            labels: labels.into_iter().map(Into::into).collect(),
        }
    }
}

/// A subtask-typed collection of labeled instances.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    subtask: Subtask,
    languages: BTreeSet<String>,
    instances: Vec<LabeledInstance>,
    label_space: LabelSpace,
}

impl Dataset {
    pub fn new(
        subtask: Subtask,
        languages: BTreeSet<String>,
        instances: Vec<LabeledInstance>,
        label_space: LabelSpace,
    ) -> Result<Self> {
        if label_space.subtask() != subtask {
            return Err(CorpusError::Validation(format!(
                "label space belongs to {}, dataset is {subtask}",
                label_space.subtask()
            )));
        }
        let mut ids = std::collections::HashSet::with_capacity(instances.len());
        for inst in &instances {
            if !ids.insert(inst.unit_id.as_str()) {
                return Err(CorpusError::Validation(format!(
                    "duplicate unit id {:?}",
                    inst.unit_id
                )));
            }
            if label_space.kind() == LabelKind::Multiclass && inst.labels.len() != 1 {
                return Err(CorpusError::Validation(format!(
                    "unit {:?} has {} labels; multiclass needs exactly one",
                    inst.unit_id,
                    inst.labels.len()
                )));
            }
            if let Some(bad) = inst.labels.iter().find(|l| !label_space.contains(l)) {
                return Err(CorpusError::Validation(format!(
                    "unit {:?} carries unknown label {bad:?}",
                    inst.unit_id
                )));
            }
        }
        Ok(Self {
            subtask,
            languages,
            instances,
            label_space,
        })
    }

    pub fn subtask(&self) -> Subtask {
        self.subtask
    }

    pub fn languages(&self) -> &BTreeSet<String> {
        &self.languages
    }

    pub fn instances(&self) -> &[LabeledInstance] {
        &self.instances
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// The single language of a language-local dataset.
    pub fn language(&self) -> Option<&str> {
        match self.languages.len() {
            1 => self.languages.iter().next().map(String::as_str),
            _ => None,
        }
    }
}
