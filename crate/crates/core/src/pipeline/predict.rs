use std::collections::BTreeSet;
use std::path::Path;

use super::manifest::write_atomic;
use super::{PipelineError, Result};
use crate::backend::BackendHandle;
use crate::classifier::{predict_multiclass, predict_multilabel, LinearModel};
use crate::corpus::{render_labels, Dataset, LabelKind, LabelMap, LabelSpace, Subtask, Unit};
use crate::metrics::{score_label_sets, EvalReport};

/// Anything that maps texts to label sets over a fixed label space.
pub trait Predictor: Sync {
    fn label_space(&self) -> &LabelSpace;

    fn predict_batch(&self, texts: &[String]) -> Result<Vec<BTreeSet<String>>>;
}

impl Predictor for LinearModel {
    fn label_space(&self) -> &LabelSpace {
        LinearModel::label_space(self)
    }

    fn predict_batch(&self, texts: &[String]) -> Result<Vec<BTreeSet<String>>> {
        texts
            .iter()
            .map(|t| {
                Ok(match self.kind() {
                    LabelKind::Multiclass => BTreeSet::from([predict_multiclass(self, t)?.0]),
                    LabelKind::Multilabel => predict_multilabel(self, t)?.0,
                })
            })
            .collect()
    }
}

/// Classification served by a backend process: argmax for multiclass, scores
/// at or above `threshold` for multilabel.
pub struct RemotePredictor<'a> {
    pub handle: &'a BackendHandle,
    pub label_space: LabelSpace,
    pub threshold: f64,
}

impl Predictor for RemotePredictor<'_> {
    fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    fn predict_batch(&self, texts: &[String]) -> Result<Vec<BTreeSet<String>>> {
        let scores = self.handle.request_classify(texts, &self.label_space)?;
        let labels = self.label_space.labels();
        Ok(scores
            .iter()
            .map(|s| match self.label_space.kind() {
                LabelKind::Multiclass => {
                    let best = s
                        .iter()
                        .enumerate()
                        .fold(0, |b, (i, v)| if *v > s[b] { i } else { b });
                    BTreeSet::from([labels[best].clone()])
                }
                LabelKind::Multilabel => s
                    .iter()
                    .zip(labels)
                    .filter(|(v, _)| **v >= self.threshold)
                    .map(|(_, l)| l.clone())
                    .collect(),
            })
            .collect())
    }
}

const BATCH: usize = 32;

fn predict_units(predictor: &dyn Predictor, units: &[Unit]) -> Result<LabelMap> {
    let mut out = LabelMap::with_capacity(units.len());
    for chunk in units.chunks(BATCH) {
        let texts: Vec<String> = chunk.iter().map(|u| u.text.clone()).collect();
        let preds = predictor
            .predict_batch(&texts)
            .map_err(|e| PipelineError::Inference {
                unit: chunk[0].unit_id.clone(),
                message: e.to_string(),
            })?;
        if preds.len() != chunk.len() {
            return Err(PipelineError::Inference {
                unit: chunk[0].unit_id.clone(),
                message: format!("{} predictions for {} units", preds.len(), chunk.len()),
            });
        }
        for (u, p) in chunk.iter().zip(preds) {
            if out.insert(u.unit_id.clone(), p).is_some() {
                return Err(PipelineError::Inference {
                    unit: u.unit_id.clone(),
                    message: "duplicate unit id in test data".into(),
                });
            }
        }
    }
    Ok(out)
}

/// Predicts every unit and writes one row per unit, in input order, in the
/// label file format. Nothing is written unless every unit was predicted.
pub fn produce_predictions(
    predictor: &dyn Predictor,
    units: &[Unit],
    subtask: Subtask,
    path: &Path,
) -> Result<usize> {
    let preds = predict_units(predictor, units)?;
    let body = render_labels(subtask, preds.iter().map(|(k, v)| (k.as_str(), v)))?;
    write_atomic(path, body.as_bytes())?;
    Ok(preds.len())
}

/// Scores `predictor` on a labeled dataset.
pub(crate) fn evaluate(predictor: &dyn Predictor, dataset: &Dataset) -> Result<EvalReport> {
    let units: Vec<Unit> = dataset
        .instances()
        .iter()
        .map(|i| Unit {
            unit_id: i.unit_id.clone(),
            text: i.text.clone(),
        })
        .collect();
    let preds = predict_units(predictor, &units)?;
    let gold: LabelMap = dataset
        .instances()
        .iter()
        .map(|i| (i.unit_id.clone(), i.labels.clone()))
        .collect();
    Ok(score_label_sets(&gold, &preds, dataset.label_space())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::FeaturizerConfig;
    use crate::corpus::parse_labels;

    fn model() -> LinearModel {
        let space = LabelSpace::custom(
            Subtask::S3,
            LabelKind::Multilabel,
            vec!["A".into(), "B".into()],
        )
        .unwrap();
        let mut m = LinearModel::zeros(space, FeaturizerConfig { hash_dim: 1 << 10, ..Default::default() }).unwrap();
        *m.bias_mut(0) = 3.0;
        *m.bias_mut(1) = -3.0;
        m
    }

    fn units(n_articles: usize, paragraphs: usize) -> Vec<Unit> {
        (0..n_articles)
            .flat_map(|a| {
                (1..=paragraphs).map(move |p| Unit {
                    unit_id: format!("{}#{p}", 100 + a),
                    text: format!("article {a} paragraph {p}"),
                })
            })
            .collect()
    }

    #[test]
    fn one_row_per_unit_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out/pred.txt");
        let m = model();
        let us = units(3, 7);
        assert_eq!(produce_predictions(&m, &us, Subtask::S3, &path).unwrap(), 21);
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 21);
        assert_eq!(lines[0], "100\t1\tA");
        assert_eq!(lines[7], "101\t1\tA");
        let back = parse_labels(&path, m.label_space()).unwrap();
        let ids: Vec<&String> = back.keys().collect();
        let expect: Vec<&String> = us.iter().map(|u| &u.unit_id).collect();
        assert_eq!(ids, expect);
    }

    struct Failing(LabelSpace);

    impl Predictor for Failing {
        fn label_space(&self) -> &LabelSpace {
            &self.0
        }
        fn predict_batch(&self, texts: &[String]) -> Result<Vec<BTreeSet<String>>> {
            if texts.iter().any(|t| t.contains("article 2")) {
                return Err(PipelineError::Selection("boom".into()));
            }
            Ok(texts.iter().map(|_| BTreeSet::new()).collect())
        }
    }

    #[test]
    fn failure_leaves_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pred.txt");
        let us = units(40, 1);
        let err = produce_predictions(&Failing(model().label_space().clone()), &us, Subtask::S3, &path).unwrap_err();
        assert!(matches!(err, PipelineError::Inference { .. }));
        assert!(!path.exists());
    }

    #[test]
    fn duplicate_units_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut us = units(2, 1);
        us.push(us[0].clone());
        assert!(produce_predictions(&model(), &us, Subtask::S3, &dir.path().join("p")).is_err());
    }
}
