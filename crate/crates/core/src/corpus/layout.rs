//! On-disk dataset directories in the release layout:
//!
//! ```text
//! <dir>/label_space.tsv
//! <dir>/labels.tsv          rows in instance order
//! <dir>/languages.txt       one code per line
//! <dir>/articles/article<ID>.txt
//! ```
//!
//! Paragraph-level datasets may hold only some paragraphs of an article (after
//! a split). Missing positions are written as a `-` placeholder paragraph,
//! which carries no label row and is dropped again on reading.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use super::document::{compare_ids, paragraphs_of};
use super::labels::split_paragraph_unit;
use super::{
    bind, load_label_space, parse_documents, parse_labels, write_document, write_label_space,
    write_labels, CorpusError, Dataset, Document, Result,
};

const PLACEHOLDER: &str = "-";

pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    let articles = dir.join("articles");
    if articles.exists() {
        fs::remove_dir_all(&articles).map_err(|e| CorpusError::io(&articles, e))?;
    }
    fs::create_dir_all(&articles).map_err(|e| CorpusError::io(&articles, e))?;

    let languages: Vec<&str> = dataset.languages().iter().map(String::as_str).collect();
    let lang_tag = if languages.len() == 1 { languages[0] } else { "multi" };

    let mut docs: BTreeMap<String, Vec<Option<String>>> = BTreeMap::new();
    for inst in dataset.instances() {
        let paras = paragraphs_of(&inst.text);
        if dataset.subtask().is_paragraph_level() {
            if paras.len() != 1 || paras[0] != inst.text {
                return Err(CorpusError::Validation(format!(
                    "unit {:?}: paragraph text must be one trimmed paragraph",
                    inst.unit_id
                )));
            }
            let (article, index) = split_paragraph_unit(&inst.unit_id)?;
            let slots = docs.entry(article.to_string()).or_default();
            if slots.len() < index {
                slots.resize(index, None);
            }
            slots[index - 1] = Some(inst.text.clone());
        } else {
            if paras.is_empty() || paras.join("\n") != inst.text {
                return Err(CorpusError::Validation(format!(
                    "unit {:?}: article text is not representable as blank-line paragraphs",
                    inst.unit_id
                )));
            }
            docs.insert(inst.unit_id.clone(), vec![Some(inst.text.clone())]);
        }
    }
    for (id, slots) in docs {
        let doc = Document {
            id,
            language: lang_tag.to_string(),
            paragraphs: slots
                .into_iter()
                .map(|p| p.unwrap_or_else(|| PLACEHOLDER.to_string()))
                .collect(),
        };
        write_document(&articles, &doc)?;
    }

    write_label_space(&dir.join("label_space.tsv"), dataset.label_space())?;
    write_labels(
        &dir.join("labels.tsv"),
        dataset.subtask(),
        dataset.instances().iter().map(|i| (i.unit_id.as_str(), &i.labels)),
    )?;
    let lang_path = dir.join("languages.txt");
    let mut body = languages.join("\n");
    body.push('\n');
    fs::write(&lang_path, body).map_err(|e| CorpusError::io(&lang_path, e))
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let space = load_label_space(&dir.join("label_space.tsv"))?;
    let lang_path = dir.join("languages.txt");
    let languages: BTreeSet<String> = fs::read_to_string(&lang_path)
        .map_err(|e| CorpusError::io(&lang_path, e))?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    let mut docs = parse_documents(&dir.join("articles"), "")?;
    docs.sort_by(|a, b| compare_ids(&a.id, &b.id));
    let labels = parse_labels(&dir.join("labels.tsv"), &space)?;
    let bound = bind(&docs, &labels, space.subtask(), &space)?;
    let ds = bound.dataset;
    Dataset::new(
        ds.subtask(),
        languages,
        ds.instances().to_vec(),
        ds.label_space().clone(),
    )
}
