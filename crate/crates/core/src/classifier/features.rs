use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use super::{ClassifierError, Result};
use crate::seed::fnv1a64;

/// Separator between tokens of an n-gram before hashing.
const NGRAM_JOINER: char = '\u{1f}';

fn default_hash_dim() -> usize {
    1 << 20
}
fn default_ngram_min() -> usize {
    1
}
fn default_ngram_max() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_max_tokens() -> usize {
    512
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    #[serde(default = "default_hash_dim")]
    pub hash_dim: usize,
    #[serde(default = "default_ngram_min")]
    pub ngram_min: usize,
    #[serde(default = "default_ngram_max")]
    pub ngram_max: usize,
    #[serde(default = "default_true")]
    pub lowercase: bool,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        Self {
            hash_dim: default_hash_dim(),
            ngram_min: default_ngram_min(),
            ngram_max: default_ngram_max(),
            lowercase: true,
            max_tokens: default_max_tokens(),
        }
    }
}

impl FeaturizerConfig {
    pub const MIN_HASH_DIM: usize = 1 << 10;

    pub fn validate(&self) -> Result<()> {
        if !self.hash_dim.is_power_of_two() || self.hash_dim < Self::MIN_HASH_DIM {
            return Err(ClassifierError::Config(format!(
                "hash_dim {} must be a power of two >= {}",
                self.hash_dim,
                Self::MIN_HASH_DIM
            )));
        }
        if self.hash_dim > u32::MAX as usize {
            return Err(ClassifierError::Config("hash_dim exceeds 2^32".into()));
        }
        if self.ngram_min == 0 || self.ngram_min > self.ngram_max {
            return Err(ClassifierError::Config(format!(
                "empty n-gram range {}..={}",
                self.ngram_min, self.ngram_max
            )));
        }
        if self.max_tokens == 0 {
            return Err(ClassifierError::Config("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// Sparse feature vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }
}

/// Unicode word segmentation (punctuation and whitespace dropped), optional
/// lowercasing, truncated to `max_tokens`.
pub fn tokenize(text: &str, cfg: &FeaturizerConfig) -> Vec<String> {
    text.unicode_words()
        .take(cfg.max_tokens)
        .map(|w| if cfg.lowercase { w.to_lowercase() } else { w.to_string() })
        .collect()
}

/// Hashes every word n-gram in range with 64-bit FNV-1a (tokens joined by
/// U+001F) modulo `hash_dim`, accumulates counts and L2-normalizes. Reads at
/// most `max_tokens` tokens.
pub fn featurize(tokens: &[String], cfg: &FeaturizerConfig) -> SparseVector {
    let tokens = &tokens[..tokens.len().min(cfg.max_tokens)];
    let mask = (cfg.hash_dim - 1) as u64;
    let mut hits: Vec<u32> = Vec::new();
    let mut buf = String::new();
    for n in cfg.ngram_min..=cfg.ngram_max {
        for gram in tokens.windows(n) {
            buf.clear();
            for (i, t) in gram.iter().enumerate() {
                if i > 0 {
                    buf.push(NGRAM_JOINER);
                }
                buf.push_str(t);
            }
            hits.push((fnv1a64(buf.as_bytes()) & mask) as u32);
        }
    }
    hits.sort_unstable();
    let mut out = SparseVector::default();
    for idx in hits {
        if out.indices.last() == Some(&idx) {
            *out.values.last_mut().unwrap() += 1.0;
        } else {
            out.indices.push(idx);
            out.values.push(1.0);
        }
    }
    let norm = out.norm();
    if norm > 0.0 {
        out.values.iter_mut().for_each(|v| *v /= norm);
    }
    out
}
