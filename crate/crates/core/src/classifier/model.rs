use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{featurize, tokenize, ClassifierError, FeaturizerConfig, Result, SparseVector};
use crate::corpus::{LabelKind, LabelSpace};

/// Linear head over hashed features.
///
/// Parameters are stored flat: the `|labels| x hash_dim` weight matrix in
/// row-major order followed by one bias per label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub(crate) label_space: LabelSpace,
    pub(crate) featurizer: FeaturizerConfig,
    /// Multilabel decision threshold (inclusive).
    pub(crate) threshold: f64,
    /// Optional per-label thresholds overriding `threshold`.
    pub(crate) label_thresholds: Option<Vec<f64>>,
    pub(crate) params: Vec<f64>,
}

impl LinearModel {
    pub const DEFAULT_THRESHOLD: f64 = 0.5;

    /// All-zero model.
    pub fn zeros(label_space: LabelSpace, featurizer: FeaturizerConfig) -> Result<Self> {
        if !featurizer.hash_dim.is_power_of_two() {
            return Err(ClassifierError::Config(format!(
                "hash_dim {} is not a power of two",
                featurizer.hash_dim
            )));
        }
        let n = label_space.len() * (featurizer.hash_dim + 1);
        Ok(Self {
            label_space,
            featurizer,
            threshold: Self::DEFAULT_THRESHOLD,
            label_thresholds: None,
            params: vec![0.0; n],
        })
    }

    pub fn kind(&self) -> LabelKind {
        self.label_space.kind()
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn featurizer(&self) -> &FeaturizerConfig {
        &self.featurizer
    }

    pub fn num_labels(&self) -> usize {
        self.label_space.len()
    }

    pub fn hash_dim(&self) -> usize {
        self.featurizer.hash_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn weights(&self) -> &[f64] {
        &self.params[..self.num_labels() * self.hash_dim()]
    }

    pub fn bias(&self) -> &[f64] {
        &self.params[self.num_labels() * self.hash_dim()..]
    }

    pub fn weight_mut(&mut self, label: usize, feature: usize) -> &mut f64 {
        let d = self.hash_dim();
        &mut self.params[label * d + feature]
    }

    pub fn bias_mut(&mut self, label: usize) -> &mut f64 {
        let off = self.num_labels() * self.hash_dim();
        &mut self.params[off + label]
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn set_threshold(&mut self, threshold: f64) -> Result<()> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(ClassifierError::Config(format!(
                "threshold {threshold} outside (0, 1)"
            )));
        }
        self.threshold = threshold;
        Ok(())
    }

    pub fn label_thresholds(&self) -> Option<&[f64]> {
        self.label_thresholds.as_deref()
    }

    pub fn threshold_for(&self, label: usize) -> f64 {
        self.label_thresholds
            .as_ref()
            .map_or(self.threshold, |t| t[label])
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn features(&self, text: &str) -> SparseVector {
        featurize(&tokenize(text, &self.featurizer), &self.featurizer)
    }

    /// Raw scores `W x + b`.
    pub fn logits(&self, x: &SparseVector) -> Vec<f64> {
        let d = self.hash_dim();
        let bias = self.bias();
        (0..self.num_labels())
            .map(|l| {
                let row = &self.params[l * d..(l + 1) * d];
                bias[l] + x.iter().map(|(i, v)| row[i] * v).sum::<f64>()
            })
            .collect()
    }

    fn require(&self, kind: LabelKind) -> Result<()> {
        if self.kind() == kind {
            Ok(())
        } else {
            Err(ClassifierError::KindMismatch {
                expected: kind,
                found: self.kind(),
            })
        }
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// First index of the maximum.
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Softmax probabilities and their argmax; ties go to the lowest label index.
pub fn predict_multiclass(model: &LinearModel, text: &str) -> Result<(String, Vec<f64>)> {
    model.require(LabelKind::Multiclass)?;
    let probs = softmax(&model.logits(&model.features(text)));
    let label = model.label_space.labels()[argmax(&probs)].clone();
    Ok((label, probs))
}

/// Per-label sigmoid scores and the labels scoring at least their threshold.
pub fn predict_multilabel(model: &LinearModel, text: &str) -> Result<(BTreeSet<String>, Vec<f64>)> {
    model.require(LabelKind::Multilabel)?;
    let scores: Vec<f64> = model
        .logits(&model.features(text))
        .into_iter()
        .map(sigmoid)
        .collect();
    let labels = scores
        .iter()
        .enumerate()
        .filter(|&(l, &s)| s >= model.threshold_for(l))
        .map(|(l, _)| model.label_space.labels()[l].clone())
        .collect();
    Ok((labels, scores))
}
