use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, Result};

/// One news article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub language: String,
    pub paragraphs: Vec<String>,
}

/// Splits article text into paragraphs. Runs of blank (or whitespace-only)
/// lines separate paragraphs; each paragraph is trimmed.
pub fn paragraphs_of(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                out.push(current.join("\n").trim().to_string());
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        out.push(current.join("\n").trim().to_string());
    }
    out
}

fn article_id(file_name: &str) -> Option<&str> {
    file_name
        .strip_prefix("article")?
        .strip_suffix(".txt")
        .filter(|id| !id.is_empty())
}

/// Numeric ids sort numerically, everything else lexicographically after them.
pub(crate) fn compare_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

/// Reads every `article<ID>.txt` in `dir`. Other files are ignored. Documents
/// come back ordered by id.
pub fn parse_documents(dir: &Path, language: &str) -> Result<Vec<Document>> {
    let entries = fs::read_dir(dir).map_err(|e| CorpusError::io(dir, e))?;
    let mut docs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CorpusError::io(dir, e))?;
        let name = entry.file_name();
        let Some(id) = name.to_str().and_then(article_id) else {
            continue;
        };
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| CorpusError::io(&path, e))?;
        let paragraphs = paragraphs_of(&text);
        if paragraphs.is_empty() {
            return Err(CorpusError::EmptyArticle {
                id: id.to_string(),
                path,
            });
        }
        docs.push(Document {
            id: id.to_string(),
            language: language.to_string(),
            paragraphs,
        });
    }
    docs.sort_by(|a, b| compare_ids(&a.id, &b.id));
    Ok(docs)
}

/// Writes `article<ID>.txt` into `dir` with blank-line paragraph separators.
pub fn write_document(dir: &Path, doc: &Document) -> Result<()> {
    if doc.id.is_empty() || doc.id.contains(['/', '\\', '\t', '\n']) {
        return Err(CorpusError::Validation(format!(
            "article id {:?} cannot be used as a file name",
            doc.id
        )));
    }
    let path = dir.join(format!("article{}.txt", doc.id));
    let mut body = doc.paragraphs.join("\n\n");
    body.push('\n');
    fs::write(&path, body).map_err(|e| CorpusError::io(&path, e))
}
