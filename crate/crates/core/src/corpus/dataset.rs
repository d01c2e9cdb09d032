use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::labels::split_paragraph_unit;
use super::{CorpusError, Dataset, Document, LabelMap, LabelSpace, LabeledInstance, Result, Subtask};
use crate::seed::rng_from_seed;

/// An unlabeled classification unit (test data).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub unit_id: String,
    pub text: String,
}

/// Result of binding labels to documents.
#[derive(Debug, Clone)]
pub struct Bound {
    pub dataset: Dataset,
    /// Units present in the documents that had no label row.
    pub unlabeled: usize,
}

/// Every classification unit of `documents`, in document then paragraph order.
/// Article-level text is the paragraphs joined by newlines.
pub fn units(documents: &[Document], subtask: Subtask) -> Vec<Unit> {
    let mut out = Vec::new();
    for doc in documents {
        if subtask.is_paragraph_level() {
            for (i, p) in doc.paragraphs.iter().enumerate() {
                out.push(Unit {
                    unit_id: format!("{}#{}", doc.id, i + 1),
                    text: p.clone(),
                });
            }
        } else {
            out.push(Unit {
                unit_id: doc.id.clone(),
                text: doc.paragraphs.join("\n"),
            });
        }
    }
    out
}

/// Attaches label rows to documents. Instances follow the label map's row
/// order; units without a label row are dropped and counted.
pub fn bind(
    documents: &[Document],
    label_map: &LabelMap,
    subtask: Subtask,
    label_space: &LabelSpace,
) -> Result<Bound> {
    let by_id: HashMap<&str, &Document> = documents.iter().map(|d| (d.id.as_str(), d)).collect();
    let mut instances = Vec::with_capacity(label_map.len());
    for (unit_id, labels) in label_map {
        let text = if subtask.is_paragraph_level() {
            let (article, paragraph) = split_paragraph_unit(unit_id)?;
            let doc = by_id.get(article).ok_or_else(|| {
                CorpusError::Validation(format!("label for unknown article {article:?}"))
            })?;
            doc.paragraphs
                .get(paragraph - 1)
                .ok_or_else(|| {
                    CorpusError::Validation(format!(
                        "label for paragraph {paragraph} of article {article:?}, which has {}",
                        doc.paragraphs.len()
                    ))
                })?
                .clone()
        } else {
            by_id
                .get(unit_id.as_str())
                .ok_or_else(|| {
                    CorpusError::Validation(format!("label for unknown article {unit_id:?}"))
                })?
                .paragraphs
                .join("\n")
        };
        instances.push(LabeledInstance {
            unit_id: unit_id.clone(),
            text,
            labels: labels.clone(),
        });
    }
    let total: usize = if subtask.is_paragraph_level() {
        documents.iter().map(|d| d.paragraphs.len()).sum()
    } else {
        documents.len()
    };
    let unlabeled = total - instances.len();
    if unlabeled > 0 {
        log::warn!("{subtask}: dropped {unlabeled} of {total} units without labels");
    }
    let languages: BTreeSet<String> = documents.iter().map(|d| d.language.clone()).collect();
    let dataset = Dataset::new(subtask, languages, instances, label_space.clone())?;
    Ok(Bound { dataset, unlabeled })
}

/// Exact rational fraction in (0, 1), e.g. `4/5`. Parses decimals (`0.8`) and
/// ratios (`4/5`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "FractionRepr", into = "String")]
pub struct TrainFraction {
    numerator: u64,
    denominator: u64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FractionRepr {
    Text(String),
    Float(f64),
}

impl TryFrom<FractionRepr> for TrainFraction {
    type Error = CorpusError;

    fn try_from(r: FractionRepr) -> Result<Self> {
        match r {
            FractionRepr::Text(s) => s.parse(),
            // shortest round-trip formatting recovers the decimal literal
            FractionRepr::Float(f) => format!("{f}").parse(),
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl TrainFraction {
    pub fn new(numerator: u64, denominator: u64) -> Result<Self> {
        if denominator == 0 || numerator == 0 || numerator >= denominator {
            return Err(CorpusError::Validation(format!(
                "train fraction {numerator}/{denominator} is not strictly between 0 and 1"
            )));
        }
        let g = gcd(numerator, denominator);
        Ok(Self {
            numerator: numerator / g,
            denominator: denominator / g,
        })
    }

    /// `floor(self * n)`.
    pub fn floor_of(self, n: usize) -> usize {
        (n as u128 * self.numerator as u128 / self.denominator as u128) as usize
    }

    pub fn as_f64(self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

impl Default for TrainFraction {
    fn default() -> Self {
        Self {
            numerator: 4,
            denominator: 5,
        }
    }
}

impl fmt::Display for TrainFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

impl From<TrainFraction> for String {
    fn from(f: TrainFraction) -> String {
        f.to_string()
    }
}

impl FromStr for TrainFraction {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || CorpusError::Validation(format!("cannot parse train fraction {s:?}"));
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim().parse().map_err(|_| bad())?;
            return Self::new(n, d);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 18 || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac_v: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac_v))
            .ok_or_else(bad)?;
        Self::new(num, den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConfig {
    #[serde(default)]
    pub train_fraction: TrainFraction,
    pub seed: u64,
}

impl SplitConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            train_fraction: TrainFraction::default(),
            seed,
        }
    }
}

/// Random train/validation split. The permutation depends only on `cfg.seed`;
/// the train side takes the first `floor(fraction * n)` permuted instances and
/// the remainder goes to validation.
pub fn split(dataset: &Dataset, cfg: &SplitConfig) -> Result<(Dataset, Dataset)> {
    let n = dataset.len();
    if n < 2 {
        return Err(CorpusError::Validation(format!(
            "cannot split {n} instance(s) into two non-empty halves"
        )));
    }
    let n_train = cfg.train_fraction.floor_of(n);
    if n_train == 0 || n_train == n {
        return Err(CorpusError::Validation(format!(
            "train fraction {} of {n} instances leaves one side empty",
            cfg.train_fraction
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(cfg.seed));
    let pick = |idx: &[usize]| -> Result<Dataset> {
        Dataset::new(
            dataset.subtask(),
            dataset.languages().clone(),
            idx.iter().map(|&i| dataset.instances()[i].clone()).collect(),
            dataset.label_space().clone(),
        )
    };
    Ok((pick(&order[..n_train])?, pick(&order[n_train..])?))
}

/// Pools language-local datasets. Unit ids become `<language>:<unit_id>`.
pub fn merge_multilingual(datasets: &[Dataset]) -> Result<Dataset> {
    let first = datasets
        .first()
        .ok_or_else(|| CorpusError::Validation("nothing to merge".into()))?;
    let mut languages = BTreeSet::new();
    let mut instances = Vec::with_capacity(datasets.iter().map(Dataset::len).sum());
    for ds in datasets {
        if ds.subtask() != first.subtask() || ds.label_space() != first.label_space() {
            return Err(CorpusError::Validation(format!(
                "cannot merge {} data with {} data",
                ds.subtask(),
                first.subtask()
            )));
        }
        let lang = ds.language().ok_or_else(|| {
            CorpusError::Validation(format!(
                "merge inputs must be language-local, got languages {:?}",
                ds.languages()
            ))
        })?;
        languages.insert(lang.to_string());
        instances.extend(ds.instances().iter().map(|inst| LabeledInstance {
            unit_id: format!("{lang}:{}", inst.unit_id),
            ..inst.clone()
        }));
    }
    Dataset::new(first.subtask(), languages, instances, first.label_space().clone())
}
