use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::BackendError;

/// Registry key of the model serving merged multilingual data.
pub const MULTILINGUAL: &str = "multilingual";

const DEFAULT_REGISTRY: &str = include_str!("../../resources/registry.tsv");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub language: String,
    pub model: String,
}

/// Language → pretrained checkpoint name, from `language<TAB>model_name` rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registry {
    entries: IndexMap<String, String>,
}

impl Default for Registry {
    /// The per-language checkpoints that performed best on development data,
    /// plus XLM-RoBERTa for the multilingual setup.
    fn default() -> Self {
        Self::parse(DEFAULT_REGISTRY).expect("bundled registry parses")
    }
}

impl Registry {
    pub fn parse(text: &str) -> Result<Self, BackendError> {
        let mut entries = IndexMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (lang, model) = line
                .split_once('\t')
                .map(|(l, m)| (l.trim(), m.trim()))
                .filter(|(l, m)| !l.is_empty() && !m.is_empty())
                .ok_or_else(|| {
                    BackendError::Protocol(format!(
                        "registry line {}: expected `language<TAB>model_name`",
                        i + 1
                    ))
                })?;
            if entries.insert(lang.to_string(), model.to_string()).is_some() {
                return Err(BackendError::Protocol(format!(
                    "registry line {}: duplicate language {lang:?}",
                    i + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = fs::read_to_string(path)
            .map_err(|e| BackendError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, language: &str) -> Option<RegistryEntry> {
        self.entries.get(language).map(|m| RegistryEntry {
            language: language.to_string(),
            model: m.clone(),
        })
    }

    /// The language's own model, or the multilingual one.
    pub fn resolve(&self, language: &str) -> Option<RegistryEntry> {
        self.get(language).or_else(|| self.get(MULTILINGUAL))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(l, m)| (l.as_str(), m.as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_defaults() {
        let r = Registry::default();
        assert_eq!(r.get(MULTILINGUAL).unwrap().model, "xlm-roberta-large");
        assert_eq!(r.get("en").unwrap().model, "roberta-large");
        assert_eq!(r.get("ge").unwrap().model, "uklfr/gottbert-base");
        assert_eq!(r.get("po").unwrap().model, "allegro/herbert-large-cased");
        assert_eq!(r.resolve("ka").unwrap().model, "xlm-roberta-large");
        assert_eq!(r.iter().count(), 7);
    }

    #[test]
    fn rejects_malformed_rows() {
        assert!(Registry::parse("en roberta\n").is_err());
        assert!(Registry::parse("en\ta\nen\tb\n").is_err());
    }
}
