use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::AugmentError;

/// Lowercase token → synonyms, read from `token<TAB>syn1,syn2,...` rows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    entries: HashMap<String, Vec<String>>,
}

impl SynonymLexicon {
    pub fn new(entries: HashMap<String, Vec<String>>) -> Result<Self, AugmentError> {
        let mut out = HashMap::with_capacity(entries.len());
        for (token, synonyms) in entries {
            let key = token.to_lowercase();
            Self::check(&key, &synonyms)?;
            out.insert(key, synonyms);
        }
        Ok(Self { entries: out })
    }

    fn check(token: &str, synonyms: &[String]) -> Result<(), AugmentError> {
        if synonyms.is_empty() {
            return Err(AugmentError::Lexicon(format!("{token:?} has no synonyms")));
        }
        if synonyms.len() == 1 && synonyms[0].to_lowercase() == token {
            return Err(AugmentError::Lexicon(format!(
                "{token:?} lists only itself as a synonym"
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AugmentError> {
        let text = fs::read_to_string(path)
            .map_err(|e| AugmentError::Lexicon(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, AugmentError> {
        let mut entries: HashMap<String, Vec<String>> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (token, syns) = line.split_once('\t').ok_or_else(|| {
                AugmentError::Lexicon(format!("line {}: expected `token<TAB>synonyms`", i + 1))
            })?;
            let token = token.trim().to_lowercase();
            let list = entries.entry(token.clone()).or_default();
            for s in syns.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                if !list.iter().any(|x| x == s) {
                    list.push(s.to_string());
                }
            }
            Self::check(&token, list).map_err(|e| match e {
                AugmentError::Lexicon(m) => AugmentError::Lexicon(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(Self { entries })
    }

    pub fn synonyms(&self, token: &str) -> Option<&[String]> {
        self.entries.get(&token.to_lowercase()).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rows sorted by token.
    pub fn render(&self) -> String {
        let mut keys: Vec<&String> = self.entries.keys().collect();
        keys.sort();
        keys.into_iter()
            .map(|k| format!("{k}\t{}\n", self.entries[k].join(",")))
            .collect()
    }
}
