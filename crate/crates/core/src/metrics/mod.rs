//! F1 scoring for single-label and multi-label predictions.
//!
//! Conventions: a 0/0 precision, recall or F1 is 0; labels with no gold and no
//! predicted occurrences still count toward the macro average. The one
//! exception is micro F1 over a multilabel corpus where gold and predictions
//! are empty everywhere, which is 1.

mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{LabelKind, LabelSpace, Subtask};

pub use oracle::oracle_score;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("missing predictions for {} unit(s): {}", .0.len(), .0.join(", "))]
    MissingPredictions(Vec<String>),
    #[error("predictions for {} unit(s) absent from gold: {}", .0.len(), .0.join(", "))]
    ExtraPredictions(Vec<String>),
    #[error("unit {unit}: label {label:?} is not in the label space")]
    UnknownLabel { unit: String, label: String },
    #[error("unit {unit}: multiclass gold and predictions need exactly one label, found {found}")]
    Cardinality { unit: String, found: usize },
    #[error("nothing to score: gold is empty")]
    Empty,
}

pub type Result<T> = std::result::Result<T, MetricsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    F1Macro,
    F1Micro,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::F1Macro => "f1_macro",
            Metric::F1Micro => "f1_micro",
        })
    }
}

/// The ranking measure of a subtask.
pub fn official_measure(subtask: Subtask) -> Metric {
    match subtask {
        Subtask::S1 => Metric::F1Macro,
        Subtask::S2 | Subtask::S3 => Metric::F1Micro,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub subtask: Subtask,
    pub f1_macro: f64,
    pub f1_micro: f64,
    pub per_label: IndexMap<String, LabelScore>,
    pub n_instances: usize,
}

impl EvalReport {
    pub fn value(&self, metric: Metric) -> f64 {
        match metric {
            Metric::F1Macro => self.f1_macro,
            Metric::F1Micro => self.f1_micro,
        }
    }

    pub fn official(&self) -> f64 {
        self.value(official_measure(self.subtask))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Counts {
    fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    fn score(&self) -> LabelScore {
        LabelScore {
            precision: ratio(self.tp, self.tp + self.fp),
            recall: ratio(self.tp, self.tp + self.fn_),
            f1: self.f1(),
            support: self.tp + self.fn_,
        }
    }
}

fn check_coverage<G, P>(gold: &BTreeMap<String, G>, pred: &BTreeMap<String, P>) -> Result<()> {
    if gold.is_empty() {
        return Err(MetricsError::Empty);
    }
    let missing: Vec<String> = gold.keys().filter(|k| !pred.contains_key(*k)).cloned().collect();
    if !missing.is_empty() {
        return Err(MetricsError::MissingPredictions(missing));
    }
    let extra: Vec<String> = pred.keys().filter(|k| !gold.contains_key(*k)).cloned().collect();
    if !extra.is_empty() {
        return Err(MetricsError::ExtraPredictions(extra));
    }
    Ok(())
}

fn index(space: &LabelSpace, unit: &str, label: &str) -> Result<usize> {
    space.index_of(label).ok_or_else(|| MetricsError::UnknownLabel {
        unit: unit.to_string(),
        label: label.to_string(),
    })
}

fn report(space: &LabelSpace, per: &[Counts], n: usize, micro: f64) -> EvalReport {
    let per_label: IndexMap<String, LabelScore> = space
        .labels()
        .iter()
        .zip(per)
        .map(|(l, c)| (l.clone(), c.score()))
        .collect();
    let f1_macro = per_label.values().map(|s| s.f1).sum::<f64>() / space.len() as f64;
    EvalReport {
        subtask: space.subtask(),
        f1_macro,
        f1_micro: micro,
        per_label,
        n_instances: n,
    }
}

/// One-vs-rest scoring of single-label predictions. Micro F1 equals accuracy.
pub fn score_multiclass(
    gold: &BTreeMap<String, String>,
    pred: &BTreeMap<String, String>,
    space: &LabelSpace,
) -> Result<EvalReport> {
    check_coverage(gold, pred)?;
    let mut per = vec![Counts::default(); space.len()];
    let mut pooled = Counts::default();
    for (unit, g) in gold {
        let gi = index(space, unit, g)?;
        let pi = index(space, unit, &pred[unit])?;
        if gi == pi {
            per[gi].tp += 1;
            pooled.tp += 1;
        } else {
            per[pi].fp += 1;
            per[gi].fn_ += 1;
            pooled.fp += 1;
            pooled.fn_ += 1;
        }
    }
    Ok(report(space, &per, gold.len(), pooled.f1()))
}

/// Pair-level scoring of label-set predictions.
pub fn score_multilabel(
    gold: &BTreeMap<String, BTreeSet<String>>,
    pred: &BTreeMap<String, BTreeSet<String>>,
    space: &LabelSpace,
) -> Result<EvalReport> {
    check_coverage(gold, pred)?;
    let mut per = vec![Counts::default(); space.len()];
    let mut pooled = Counts::default();
    for (unit, g) in gold {
        let p = &pred[unit];
        for label in g.union(p) {
            let i = index(space, unit, label)?;
            match (g.contains(label), p.contains(label)) {
                (true, true) => per[i].tp += 1,
                (false, true) => per[i].fp += 1,
                _ => per[i].fn_ += 1,
            }
        }
        pooled.tp += g.intersection(p).count();
        pooled.fp += p.difference(g).count();
        pooled.fn_ += g.difference(p).count();
    }
    let micro = if pooled.tp + pooled.fp + pooled.fn_ == 0 {
        1.0
    } else {
        pooled.f1()
    };
    Ok(report(space, &per, gold.len(), micro))
}

/// Scores label maps as parsed from label files, dispatching on the label
/// space kind.
pub fn score_label_sets<'a, I>(gold: I, pred: I, space: &LabelSpace) -> Result<EvalReport>
where
    I: IntoIterator<Item = (&'a String, &'a BTreeSet<String>)>,
{
    let gold: BTreeMap<String, BTreeSet<String>> =
        gold.into_iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    let pred: BTreeMap<String, BTreeSet<String>> =
        pred.into_iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    match space.kind() {
        LabelKind::Multilabel => score_multilabel(&gold, &pred, space),
        LabelKind::Multiclass => {
            let single = |m: BTreeMap<String, BTreeSet<String>>| -> Result<BTreeMap<String, String>> {
                m.into_iter()
                    .map(|(unit, set)| {
                        if set.len() != 1 {
                            return Err(MetricsError::Cardinality {
                                found: set.len(),
                                unit,
                            });
                        }
                        let label = set.into_iter().next().unwrap();
                        Ok((unit, label))
                    })
                    .collect()
            };
            score_multiclass(&single(gold)?, &single(pred)?, space)
        }
    }
}
