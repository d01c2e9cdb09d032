use rand::seq::SliceRandom;

use super::loss::accumulate_gradient;
use super::{
    adam_step, featurize, predict_multilabel, tokenize, AdamState, ClassifierError, Example,
    FeaturizerConfig, LinearModel, Result, TrainConfig,
};
use crate::corpus::{Dataset, LabelKind};
use crate::seed::rng_from_seed;

/// A trained model and its per-epoch mean training loss.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LinearModel,
    pub epoch_losses: Vec<f64>,
}

pub(crate) fn examples(dataset: &Dataset, featurizer: &FeaturizerConfig) -> Vec<Example> {
    let space = dataset.label_space();
    dataset
        .instances()
        .iter()
        .map(|inst| Example {
            features: featurize(&tokenize(&inst.text, featurizer), featurizer),
            targets: inst
                .labels
                .iter()
                .filter_map(|l| space.index_of(l))
                .collect(),
        })
        .collect()
}

/// One seed's training run. Parameters start at zero; the seed drives the
/// per-epoch shuffling. The featurizer's token limit is taken from
/// `cfg.max_seq_len`.
pub fn train(
    dataset: &Dataset,
    cfg: &TrainConfig,
    featurizer: &FeaturizerConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let featurizer = FeaturizerConfig {
        max_tokens: cfg.max_seq_len,
        ..featurizer.clone()
    };
    featurizer.validate()?;
    if dataset.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    let examples = examples(dataset, &featurizer);
    let mut model = LinearModel::zeros(dataset.label_space().clone(), featurizer)?;
    let adam = cfg.adam();
    let mut state = AdamState::new(model.params.len());
    let mut grad = vec![0.0; model.params.len()];
    let mut rng = rng_from_seed(seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| examples[i].clone()));
            let loss = accumulate_gradient(&model, &batch, &mut grad)?;
            weighted += loss * chunk.len() as f64;
            adam_step(&mut model.params, &grad, &mut state, &adam)?;
        }
        let mean = weighted / examples.len() as f64;
        log::debug!("epoch {}: mean loss {mean:.6}", epoch + 1);
        epoch_losses.push(mean);
    }
    if !model.is_finite() {
        return Err(ClassifierError::Numeric("training produced non-finite weights".into()));
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
    })
}

/// Chooses, per label, the threshold in {0.05, 0.10, ..., 0.95} maximizing
/// that label's F1 on `validation`. Ties go to the candidate nearest the
/// model's global threshold; labels without positive validation examples keep
/// the global threshold.
pub fn tune_thresholds(model: &mut LinearModel, validation: &Dataset) -> Result<()> {
    if model.kind() != LabelKind::Multilabel {
        return Err(ClassifierError::KindMismatch {
            expected: LabelKind::Multilabel,
            found: model.kind(),
        });
    }
    let n_labels = model.num_labels();
    let mut scores = Vec::with_capacity(validation.len());
    let mut gold = Vec::with_capacity(validation.len());
    for inst in validation.instances() {
        scores.push(predict_multilabel(model, &inst.text)?.1);
        gold.push(
            (0..n_labels)
                .map(|l| inst.labels.contains(&model.label_space.labels()[l]))
                .collect::<Vec<_>>(),
        );
    }
    let base = model.threshold;
    let candidates: Vec<f64> = (1..20).map(|k| k as f64 * 0.05).collect();
    let mut chosen = vec![base; n_labels];
    for l in 0..n_labels {
        if !gold.iter().any(|g| g[l]) {
            continue;
        }
        let f1_at = |t: f64| {
            let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
            for (s, g) in scores.iter().zip(&gold) {
                match (s[l] >= t, g[l]) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    _ => {}
                }
            }
            if tp == 0 {
                0.0
            } else {
                2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
            }
        };
        let mut best = (f64::NEG_INFINITY, f64::INFINITY, base);
        for &t in &candidates {
            let f = f1_at(t);
            let dist = (t - base).abs();
            if f > best.0 || (f == best.0 && dist < best.1) {
                best = (f, dist, t);
            }
        }
        chosen[l] = best.2;
    }
    model.label_thresholds = Some(chosen);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::predict_multiclass;
    use crate::corpus::{LabelSpace, LabeledInstance, Subtask};

    fn toy() -> Dataset {
        let space = LabelSpace::new(
            Subtask::S1,
            LabelKind::Multiclass,
            vec!["opinion".into(), "reporting".into(), "satire".into()],
        )
        .unwrap();
        let keys = ["believe", "announced", "joke"];
        let inst = (0..60)
            .map(|i| {
                let c = i % 3;
                LabeledInstance::new(
                    i.to_string(),
                    format!("filler{} {} filler{}", i % 7, keys[c], i % 5),
                    [space.labels()[c].clone()],
                )
            })
            .collect();
        Dataset::new(Subtask::S1, ["en".to_string()].into(), inst, space).unwrap()
    }

    fn small() -> FeaturizerConfig {
        FeaturizerConfig {
            hash_dim: 1 << 12,
            ..Default::default()
        }
    }

    #[test]
    fn loss_decreases_and_fits() {
        let out = train(&toy(), &TrainConfig::default(), &small(), 3).unwrap();
        let first = out.epoch_losses[0];
        let last = *out.epoch_losses.last().unwrap();
        assert_eq!(out.epoch_losses.len(), 10);
        assert!(last < first);
        assert!(last < 3f64.ln() / 2.0);
        let (label, _) = predict_multiclass(&out.model, "a joke here").unwrap();
        assert_eq!(label, "satire");
        assert_eq!(out.model.featurizer().max_tokens, 512);
    }

    #[test]
    fn training_is_deterministic() {
        let a = train(&toy(), &TrainConfig::default(), &small(), 11).unwrap();
        let b = train(&toy(), &TrainConfig::default(), &small(), 11).unwrap();
        assert!(a
            .model
            .params()
            .iter()
            .zip(b.model.params())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(a.epoch_losses, b.epoch_losses);
    }

    #[test]
    fn rejects_empty_and_bad_config() {
        let ds = toy();
        let empty = Dataset::new(ds.subtask(), ds.languages().clone(), vec![], ds.label_space().clone()).unwrap();
        assert!(matches!(
            train(&empty, &TrainConfig::default(), &small(), 0),
            Err(ClassifierError::EmptyDataset)
        ));
        let tiny = FeaturizerConfig {
            hash_dim: 64,
            ..Default::default()
        };
        assert!(train(&ds, &TrainConfig::default(), &tiny, 0).is_err());
    }

    #[test]
    fn huge_learning_rate_is_a_numeric_error_or_finite() {
        let cfg = TrainConfig {
            learning_rate: 1e308,
            epochs: 2,
            ..Default::default()
        };
        match train(&toy(), &cfg, &small(), 0) {
            Err(ClassifierError::Numeric(_)) => {}
            Ok(out) => assert!(out.model.is_finite()),
            Err(other) => panic!("{other}"),
        }
    }
}
