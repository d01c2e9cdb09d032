use super::model::{sigmoid, softmax};
use super::{ClassifierError, LinearModel, Result, SparseVector};
use crate::corpus::LabelKind;

/// One featurized training example with gold label indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: SparseVector,
    pub targets: Vec<usize>,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean softmax cross-entropy (multiclass) or mean over examples of the summed
/// per-label binary cross-entropies (multilabel), with its exact gradient in
/// the model's flat parameter layout.
pub fn loss_and_gradient(model: &LinearModel, batch: &[Example]) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; model.params().len()];
    let loss = accumulate_gradient(model, batch, &mut grad)?;
    Ok((loss, grad))
}

/// Like [`loss_and_gradient`] but overwrites a caller-owned gradient buffer.
pub(crate) fn accumulate_gradient(
    model: &LinearModel,
    batch: &[Example],
    grad: &mut [f64],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(ClassifierError::Config("empty batch".into()));
    }
    debug_assert_eq!(grad.len(), model.params().len());
    grad.iter_mut().for_each(|g| *g = 0.0);
    let n_labels = model.num_labels();
    let d = model.hash_dim();
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    let mut dz = vec![0.0; n_labels];
    for ex in batch {
        if let Some(&bad) = ex.targets.iter().find(|&&t| t >= n_labels) {
            return Err(ClassifierError::Config(format!("target index {bad} out of range")));
        }
        let z = model.logits(&ex.features);
        match model.kind() {
            LabelKind::Multiclass => {
                let &[y] = ex.targets.as_slice() else {
                    return Err(ClassifierError::Config(format!(
                        "multiclass example needs one target, has {}",
                        ex.targets.len()
                    )));
                };
                let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                total += lse - z[y];
                let p = softmax(&z);
                for l in 0..n_labels {
                    dz[l] = p[l] - if l == y { 1.0 } else { 0.0 };
                }
            }
            LabelKind::Multilabel => {
                for l in 0..n_labels {
                    let y = if ex.targets.contains(&l) { 1.0 } else { 0.0 };
                    total += softplus(z[l]) - y * z[l];
                    dz[l] = sigmoid(z[l]) - y;
                }
            }
        }
        for (l, &g) in dz.iter().enumerate() {
            let row = &mut grad[l * d..(l + 1) * d];
            for (i, v) in ex.features.iter() {
                row[i] += g * v * scale;
            }
            grad[n_labels * d + l] += g * scale;
        }
    }
    let loss = total * scale;
    if !loss.is_finite() {
        return Err(ClassifierError::Numeric(format!(
            "non-finite loss {loss}; lower the learning rate or check the input"
        )));
    }
    Ok(loss)
}
