//! Token-level text augmentation.
//!
//! Random perturbations (synonym replacement, insertion, deletion, swap) run
//! locally; contextual insertion and substitution delegate mask filling to a
//! backend. Every augmented copy draws from its own random stream derived from
//! `(plan.seed, instance index, copy index)`, so the output does not depend on
//! thread count or iteration order.

mod lexicon;

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, MaskFiller, MASK};
use crate::corpus::{Dataset, LabeledInstance};
use crate::seed::{derive_seed, rng_from_seed};

pub use lexicon::SynonymLexicon;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("invalid augmentation plan: {0}")]
    Plan(String),
    #[error("lexicon error: {0}")]
    Lexicon(String),
    #[error("contextual augmentation of {instance:?} failed: {source}")]
    Backend {
        instance: String,
        #[source]
        source: BackendError,
    },
    #[error("augmented data is invalid: {0}")]
    Dataset(#[from] crate::corpus::CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentOp {
    SynonymReplace,
    RandomInsert,
    RandomDelete,
    RandomSwap,
    ContextualInsert,
    ContextualSubstitute,
}

impl AugmentOp {
    pub fn is_contextual(self) -> bool {
        matches!(self, AugmentOp::ContextualInsert | AugmentOp::ContextualSubstitute)
    }
}

impl fmt::Display for AugmentOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("op serializes");
        f.write_str(s.as_str().unwrap_or_default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextualMode {
    Insert,
    Substitute,
}

fn default_rate() -> f64 {
    0.1
}

fn default_copies() -> usize {
    1
}

fn default_ops() -> Vec<AugmentOp> {
    vec![
        AugmentOp::RandomInsert,
        AugmentOp::RandomDelete,
        AugmentOp::RandomSwap,
    ]
}

/// Which ops to apply, how strongly, and how many augmented copies to emit.
/// Ops are applied in order to each copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentPlan {
    #[serde(default = "default_ops")]
    pub ops: Vec<AugmentOp>,
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default = "default_copies")]
    pub copies: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for AugmentPlan {
    fn default() -> Self {
        Self {
            ops: default_ops(),
            rate: default_rate(),
            copies: default_copies(),
            seed: 0,
        }
    }
}

impl AugmentPlan {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(AugmentError::Plan(format!("rate {} outside [0, 1]", self.rate)));
        }
        if self.copies == 0 {
            return Err(AugmentError::Plan("copies must be at least 1".into()));
        }
        Ok(())
    }

    pub fn needs_lexicon(&self) -> bool {
        self.ops.contains(&AugmentOp::SynonymReplace)
    }

    pub fn needs_backend(&self) -> bool {
        self.ops.iter().any(|op| op.is_contextual())
    }
}

fn count_for(rate: f64, n: usize) -> usize {
    (rate * n as f64).round() as usize
}

/// Replaces each in-lexicon token with probability `rate` by a uniformly drawn
/// synonym.
pub fn synonym_replace<R: Rng + ?Sized>(
    tokens: &[String],
    lexicon: &SynonymLexicon,
    rate: f64,
    rng: &mut R,
) -> Vec<String> {
    tokens
        .iter()
        .map(|tok| match lexicon.synonyms(tok) {
            Some(syns) if rng.gen_bool(rate) => syns[rng.gen_range(0..syns.len())].clone(),
            _ => tok.clone(),
        })
        .collect()
}

/// Inserts `round(rate * n)` copies of randomly chosen tokens at random
/// positions.
pub fn random_insert<R: Rng + ?Sized>(tokens: &[String], rate: f64, rng: &mut R) -> Vec<String> {
    let mut out = tokens.to_vec();
    if out.is_empty() {
        return out;
    }
    for _ in 0..count_for(rate, tokens.len()) {
        let tok = out[rng.gen_range(0..out.len())].clone();
        let pos = rng.gen_range(0..=out.len());
        out.insert(pos, tok);
    }
    out
}

/// Drops each token with probability `rate`; keeps one random original token
/// if everything was dropped.
pub fn random_delete<R: Rng + ?Sized>(tokens: &[String], rate: f64, rng: &mut R) -> Vec<String> {
    if tokens.is_empty() {
        return Vec::new();
    }
    let kept: Vec<String> = tokens
        .iter()
        .filter(|_| !rng.gen_bool(rate))
        .cloned()
        .collect();
    if kept.is_empty() {
        vec![tokens[rng.gen_range(0..tokens.len())].clone()]
    } else {
        kept
    }
}

/// Performs `round(rate * n)` swaps of two distinct random positions.
pub fn random_swap<R: Rng + ?Sized>(tokens: &[String], rate: f64, rng: &mut R) -> Vec<String> {
    let mut out = tokens.to_vec();
    let n = out.len();
    if n < 2 {
        return out;
    }
    for _ in 0..count_for(rate, n) {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        out.swap(i, j);
    }
    out
}

/// Masks positions chosen with probability `rate` (substitute) or inserts a
/// mask after them (insert), then asks the backend for the top-1 fill of each
/// mask. Nothing is sent when no position is chosen.
pub fn contextual_edit_tokens<R: Rng + ?Sized>(
    tokens: &[String],
    backend: &dyn MaskFiller,
    mode: ContextualMode,
    rate: f64,
    rng: &mut R,
) -> Result<Vec<String>, BackendError> {
    let mut out: Vec<String> = Vec::with_capacity(tokens.len());
    let mut masked = Vec::new();
    for tok in tokens {
        let chosen = rng.gen_bool(rate);
        match (chosen, mode) {
            (true, ContextualMode::Substitute) => {
                masked.push(out.len());
                out.push(MASK.to_string());
            }
            (true, ContextualMode::Insert) => {
                out.push(tok.clone());
                masked.push(out.len());
                out.push(MASK.to_string());
            }
            (false, _) => out.push(tok.clone()),
        }
    }
    if masked.is_empty() {
        return Ok(out);
    }
    let fills = backend.fill(&out.join(" "))?;
    if fills.len() != masked.len() {
        return Err(BackendError::Protocol(format!(
            "expected {} fills, got {}",
            masked.len(),
            fills.len()
        )));
    }
    for (pos, fill) in masked.into_iter().zip(fills) {
        out[pos] = fill;
    }
    Ok(out)
}

/// Instance-level wrapper of [`contextual_edit_tokens`]; labels are kept.
pub fn contextual_edit<R: Rng + ?Sized>(
    instance: &LabeledInstance,
    backend: &dyn MaskFiller,
    mode: ContextualMode,
    rate: f64,
    rng: &mut R,
) -> Result<LabeledInstance, AugmentError> {
    let tokens = whitespace_tokens(&instance.text);
    let edited = contextual_edit_tokens(&tokens, backend, mode, rate, rng).map_err(|source| {
        AugmentError::Backend {
            instance: instance.unit_id.clone(),
            source,
        }
    })?;
    Ok(LabeledInstance {
        text: edited.join(" "),
        ..instance.clone()
    })
}

pub fn whitespace_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Id of augmented copy `copy` of `unit_id`. The suffix attaches to the
/// article part, so paragraph units stay `<article>#<index>`.
pub fn augmented_unit_id(unit_id: &str, copy: usize) -> String {
    match unit_id.rsplit_once('#') {
        Some((article, para)) if para.parse::<usize>().is_ok() => {
            format!("{article}~aug{copy}#{para}")
        }
        _ => format!("{unit_id}~aug{copy}"),
    }
}

fn augment_one(
    index: usize,
    copy: usize,
    source: &LabeledInstance,
    plan: &AugmentPlan,
    lexicon: Option<&SynonymLexicon>,
    backend: Option<&dyn MaskFiller>,
) -> Result<LabeledInstance, AugmentError> {
    let mut rng = rng_from_seed(derive_seed(plan.seed, &[index.into(), copy.into()]));
    let mut tokens = whitespace_tokens(&source.text);
    if !tokens.is_empty() {
        for op in &plan.ops {
            tokens = match op {
                AugmentOp::SynonymReplace => {
                    let lex = lexicon.expect("validated: lexicon present");
                    synonym_replace(&tokens, lex, plan.rate, &mut rng)
                }
                AugmentOp::RandomInsert => random_insert(&tokens, plan.rate, &mut rng),
                AugmentOp::RandomDelete => random_delete(&tokens, plan.rate, &mut rng),
                AugmentOp::RandomSwap => random_swap(&tokens, plan.rate, &mut rng),
                AugmentOp::ContextualInsert | AugmentOp::ContextualSubstitute => {
                    let mode = if *op == AugmentOp::ContextualInsert {
                        ContextualMode::Insert
                    } else {
                        ContextualMode::Substitute
                    };
                    let filler = backend.expect("validated: backend present");
                    contextual_edit_tokens(&tokens, filler, mode, plan.rate, &mut rng).map_err(
                        |e| AugmentError::Backend {
                            instance: source.unit_id.clone(),
                            source: e,
                        },
                    )?
                }
            };
        }
    }
    Ok(LabeledInstance {
        unit_id: augmented_unit_id(&source.unit_id, copy),
        text: if tokens.is_empty() {
            source.text.clone()
        } else {
            tokens.join(" ")
        },
        labels: source.labels.clone(),
    })
}

/// The original instances in order, then the `plan.copies` variants of the
/// first instance, then those of the second, and so on. Runs on `jobs` threads; the result is identical for
/// any thread count.
pub fn augment_dataset(
    dataset: &Dataset,
    plan: &AugmentPlan,
    lexicon: Option<&SynonymLexicon>,
    backend: Option<&dyn MaskFiller>,
    jobs: usize,
) -> Result<Dataset, AugmentError> {
    plan.validate()?;
    if plan.needs_lexicon() && lexicon.is_none() {
        return Err(AugmentError::Plan("synonym_replace needs a lexicon".into()));
    }
    if plan.needs_backend() && backend.is_none() {
        return Err(AugmentError::Plan("contextual ops need a backend".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| AugmentError::Plan(format!("cannot start worker pool: {e}")))?;
    let variants: Vec<Vec<LabeledInstance>> = pool.install(|| {
        dataset
            .instances()
            .par_iter()
            .enumerate()
            .map(|(i, inst)| {
                (0..plan.copies)
                    .map(|j| augment_one(i, j, inst, plan, lexicon, backend))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut instances = dataset.instances().to_vec();
    instances.extend(variants.into_iter().flatten());
    Ok(Dataset::new(
        dataset.subtask(),
        dataset.languages().clone(),
        instances,
        dataset.label_space().clone(),
    )?)
}
