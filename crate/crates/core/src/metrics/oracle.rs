use std::collections::{BTreeMap, BTreeSet};

use super::{MetricsError, Result};
use crate::corpus::LabelSpace;

/// Reference scorer: walks every (unit, label) pair of the label space and
/// tallies each decision on its own. Returns `(micro, macro)`.
///
/// Multiclass data is passed as singleton sets.
pub fn oracle_score(
    gold: &BTreeMap<String, BTreeSet<String>>,
    pred: &BTreeMap<String, BTreeSet<String>>,
    space: &LabelSpace,
) -> Result<(f64, f64)> {
    if gold.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut missing = Vec::new();
    for unit in gold.keys() {
        if !pred.contains_key(unit) {
            missing.push(unit.clone());
        }
    }
    if !missing.is_empty() {
        return Err(MetricsError::MissingPredictions(missing));
    }
    let mut extra = Vec::new();
    for unit in pred.keys() {
        if !gold.contains_key(unit) {
            extra.push(unit.clone());
        }
    }
    if !extra.is_empty() {
        return Err(MetricsError::ExtraPredictions(extra));
    }
    for (unit, set) in gold.iter().chain(pred.iter()) {
        for label in set {
            if !space.labels().contains(label) {
                return Err(MetricsError::UnknownLabel {
                    unit: unit.clone(),
                    label: label.clone(),
                });
            }
        }
    }

    let mut decisions: Vec<(usize, bool, bool)> = Vec::new();
    for (unit, g) in gold {
        let p = &pred[unit];
        for (j, label) in space.labels().iter().enumerate() {
            decisions.push((j, g.contains(label), p.contains(label)));
        }
    }

    let f1 = |tp: f64, fp: f64, fn_: f64| -> f64 {
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        }
    };
    let tally = |filter: &dyn Fn(usize) -> bool| {
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for &(j, g, p) in &decisions {
            if !filter(j) {
                continue;
            }
            if g && p {
                tp += 1.0;
            }
            if !g && p {
                fp += 1.0;
            }
            if g && !p {
                fn_ += 1.0;
            }
        }
        (tp, fp, fn_)
    };

    let (tp, fp, fn_) = tally(&|_| true);
    let micro = if tp + fp + fn_ == 0.0 { 1.0 } else { f1(tp, fp, fn_) };
    let mut sum = 0.0;
    for j in 0..space.len() {
        let (tp, fp, fn_) = tally(&|k| k == j);
        sum += f1(tp, fp, fn_);
    }
    Ok((micro, sum / space.len() as f64))
}
