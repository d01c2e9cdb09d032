//! Desk-scale synthetic corpora in the shared-task directory layout.
//!
//! Every label has a keyword shared by all languages; filler words are
//! language-specific pseudo-words. Articles carry the genre keyword once, one
//! keyword per frame, and per-paragraph technique keywords, so all three
//! subtasks are learnable by a bag-of-n-grams model.
//!
//! ```text
//! <out>/<lang>/{train,dev,test}-articles-subtask-<N>/article<ID>.txt
//! <out>/<lang>/{train,dev,test}-labels-subtask-<N>.txt
//! <out>/lexicon.tsv
//! ```
//!
//! Surprise languages only get a test split. Test labels are written too, so
//! desk runs can be scored end to end.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{official_label_space, write_document, write_labels, CorpusError, Document, Subtask};
use crate::seed::{derive_seed, rng_from_seed};

pub const TRAINING_LANGUAGES: [&str; 6] = ["en", "fr", "ge", "it", "po", "ru"];
pub const SURPRISE_LANGUAGES: [&str; 3] = ["ka", "gr", "es"];

const SYLLABLES: [&str; 24] = [
    "ba", "ce", "di", "fo", "gu", "ha", "ji", "ko", "la", "me", "ni", "po", "qua", "re", "si",
    "tu", "va", "we", "xi", "yo", "za", "bre", "sto", "kri",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub languages: Vec<String>,
    pub surprise_languages: Vec<String>,
    pub train_articles: usize,
    pub dev_articles: usize,
    pub test_articles: usize,
    pub vocabulary: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            languages: TRAINING_LANGUAGES.iter().map(|s| s.to_string()).collect(),
            surprise_languages: SURPRISE_LANGUAGES.iter().map(|s| s.to_string()).collect(),
            train_articles: 50,
            dev_articles: 20,
            test_articles: 20,
            vocabulary: 120,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthSummary {
    pub root: PathBuf,
    pub lexicon: PathBuf,
    pub articles: usize,
}

/// Keyword standing in for `label` in every language.
pub fn keyword(label: &str) -> String {
    label
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_lowercase()
}

fn vocabulary(language: &str, size: usize, seed: u64) -> Vec<String> {
    let mut rng = rng_from_seed(derive_seed(seed, &["vocab".into(), language.into()]));
    let mut words = BTreeSet::new();
    while words.len() < size {
        let n = rng.gen_range(2..=3);
        let w: String = (0..n).map(|_| *SYLLABLES.choose(&mut rng).unwrap()).collect();
        words.insert(format!("{w}{}", &language[..1]));
    }
    let mut words: Vec<String> = words.into_iter().collect();
    words.shuffle(&mut rng);
    words
}

struct Article {
    doc: Document,
    genre: String,
    frames: BTreeSet<String>,
    techniques: Vec<BTreeSet<String>>,
}

fn sentence<R: Rng>(rng: &mut R, vocab: &[String], keywords: &[String]) -> String {
    let mut words: Vec<String> = (0..rng.gen_range(8..14))
        .map(|_| vocab.choose(rng).unwrap().clone())
        .collect();
    for k in keywords {
        let at = rng.gen_range(0..=words.len());
        words.insert(at, k.clone());
    }
    words.join(" ")
}

fn article<R: Rng>(rng: &mut R, id: String, language: &str, vocab: &[String]) -> Article {
    let genres = official_label_space(Subtask::S1);
    let frames_space = official_label_space(Subtask::S2);
    let techniques_space = official_label_space(Subtask::S3);

    let genre = genres.labels().choose(rng).unwrap().clone();
    let n_frames = rng.gen_range(1..=3);
    let frames: BTreeSet<String> = frames_space
        .labels()
        .choose_multiple(rng, n_frames)
        .cloned()
        .collect();
    let n_paragraphs = rng.gen_range(2..=4);
    let mut keywords: Vec<Vec<String>> = vec![Vec::new(); n_paragraphs];
    keywords[rng.gen_range(0..n_paragraphs)].push(keyword(&genre));
    for f in &frames {
        keywords[rng.gen_range(0..n_paragraphs)].push(keyword(f));
    }
    let mut techniques = Vec::with_capacity(n_paragraphs);
    for kw in keywords.iter_mut() {
        let n = rng.gen_range(0..=2);
        let t: BTreeSet<String> = techniques_space
            .labels()
            .choose_multiple(rng, n)
            .cloned()
            .collect();
        kw.extend(t.iter().map(|l| keyword(l)));
        techniques.push(t);
    }
    let paragraphs = keywords.iter().map(|kw| sentence(rng, vocab, kw)).collect();
    Article {
        doc: Document {
            id,
            language: language.to_string(),
            paragraphs,
        },
        genre,
        frames,
        techniques,
    }
}

fn write_split(lang_dir: &Path, split: &str, articles: &[Article]) -> Result<(), CorpusError> {
    for subtask in Subtask::ALL {
        let n = subtask.number();
        let dir = lang_dir.join(format!("{split}-articles-subtask-{n}"));
        fs::create_dir_all(&dir).map_err(|e| CorpusError::io(&dir, e))?;
        let mut rows: Vec<(String, BTreeSet<String>)> = Vec::new();
        for a in articles {
            write_document(&dir, &a.doc)?;
            match subtask {
                Subtask::S1 => rows.push((a.doc.id.clone(), BTreeSet::from([a.genre.clone()]))),
                Subtask::S2 => rows.push((a.doc.id.clone(), a.frames.clone())),
                Subtask::S3 => {
                    for (i, t) in a.techniques.iter().enumerate() {
                        rows.push((format!("{}#{}", a.doc.id, i + 1), t.clone()));
                    }
                }
            }
        }
        let path = lang_dir.join(format!("{split}-labels-subtask-{n}.txt"));
        write_labels(&path, subtask, rows.iter().map(|(k, v)| (k.as_str(), v)))?;
    }
    Ok(())
}

/// Writes a lexicon mapping filler words to same-language alternatives.
fn write_lexicon(path: &Path, vocabs: &BTreeMap<String, Vec<String>>) -> Result<(), CorpusError> {
    let mut out = String::new();
    for vocab in vocabs.values() {
        for pair in vocab.chunks(3).filter(|c| c.len() == 3).take(20) {
            out.push_str(&format!("{}\t{},{}\n", pair[0], pair[1], pair[2]));
        }
    }
    fs::write(path, out).map_err(|e| CorpusError::io(path, e))
}

/// Generates the corpus under `out`.
pub fn generate(out: &Path, cfg: &SynthConfig) -> Result<SynthSummary, CorpusError> {
    let mut vocabs = BTreeMap::new();
    let mut total = 0;
    let all = cfg
        .languages
        .iter()
        .map(|l| (l, false))
        .chain(cfg.surprise_languages.iter().map(|l| (l, true)));
    for (lang_index, (lang, surprise)) in all.enumerate() {
        if lang.is_empty() {
            return Err(CorpusError::Validation("empty language code".into()));
        }
        let vocab = vocabulary(lang, cfg.vocabulary, cfg.seed);
        let lang_dir = out.join(lang);
        let splits: &[(&str, usize)] = if surprise {
            &[("test", cfg.test_articles)]
        } else {
            &[
                ("train", cfg.train_articles),
                ("dev", cfg.dev_articles),
                ("test", cfg.test_articles),
            ]
        };
        for (split_index, &(split, count)) in splits.iter().enumerate() {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, &[lang.as_str().into(), split.into()]));
            let base = 100_000 * (lang_index + 1) + 10_000 * (split_index + 1);
            let articles: Vec<Article> = (0..count)
                .map(|i| article(&mut rng, (base + i).to_string(), lang, &vocab))
                .collect();
            write_split(&lang_dir, split, &articles)?;
            total += count;
        }
        vocabs.insert(lang.clone(), vocab);
    }
    let lexicon = out.join("lexicon.tsv");
    write_lexicon(&lexicon, &vocabs)?;
    Ok(SynthSummary {
        root: out.to_path_buf(),
        lexicon,
        articles: total,
    })
}
