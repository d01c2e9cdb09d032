use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;

use super::{CorpusError, LabelKind, LabelSpace, Result, Subtask};

/// Gold (or predicted) label sets keyed by unit id, in file order.
pub type LabelMap = IndexMap<String, BTreeSet<String>>;

/// Reads a label inventory: a `subtask<TAB>kind` header followed by one label
/// per line.
pub fn load_label_space(path: &Path) -> Result<LabelSpace> {
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    parse_label_space(&text, path)
}

/// Parses label-space text; `origin` only names the source in errors.
pub fn parse_label_space(text: &str, origin: &Path) -> Result<LabelSpace> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (line, header) = lines.next().ok_or_else(|| CorpusError::Format {
        path: origin.to_path_buf(),
        line: 1,
        message: "missing `subtask<TAB>kind` header".into(),
    })?;
    let format_err = |message: String| CorpusError::Format {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let (subtask, kind) = header
        .split_once('\t')
        .ok_or_else(|| format_err(format!("header {header:?} is not `subtask<TAB>kind`")))?;
    let subtask: Subtask = subtask.parse().map_err(|e| format_err(format!("{e}")))?;
    let kind: LabelKind = kind.parse().map_err(|e| format_err(format!("{e}")))?;
    let labels = lines.map(|(_, l)| l.to_string()).collect();
    LabelSpace::new(subtask, kind, labels)
}

/// The shared-task label inventory of `subtask`, bundled with the crate.
pub fn official_label_space(subtask: Subtask) -> LabelSpace {
    let text = match subtask {
        Subtask::S1 => include_str!("../../resources/labels/subtask1.tsv"),
        Subtask::S2 => include_str!("../../resources/labels/subtask2.tsv"),
        Subtask::S3 => include_str!("../../resources/labels/subtask3.tsv"),
    };
    parse_label_space(text, Path::new("<bundled>")).expect("bundled label spaces are valid")
}

pub fn write_label_space(path: &Path, space: &LabelSpace) -> Result<()> {
    let mut out = format!("{}\t{}\n", space.subtask(), space.kind());
    for label in space.labels() {
        out.push_str(label);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CorpusError::io(path, e))
}

/// Parses a label TSV file. See [`parse_labels_str`].
pub fn parse_labels(path: &Path, space: &LabelSpace) -> Result<LabelMap> {
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    parse_labels_str(&text, path, space)
}

/// Parses label rows. Article-level subtasks use `id<TAB>labels`; the
/// paragraph-level subtask uses `id<TAB>paragraph<TAB>labels` and keys units as
/// `id#paragraph`. `origin` only names the source in errors.
pub fn parse_labels_str(text: &str, origin: &Path, space: &LabelSpace) -> Result<LabelMap> {
    let paragraph_level = space.subtask().is_paragraph_level();
    let mut out = LabelMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let row = raw.strip_suffix('\r').unwrap_or(raw);
        if row.trim().is_empty() {
            continue;
        }
        let err = |message: String| CorpusError::Format {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let fields: Vec<&str> = row.split('\t').collect();
        let (unit_id, label_field) = if paragraph_level {
            if !(2..=3).contains(&fields.len()) {
                return Err(err(format!(
                    "expected `article_id<TAB>paragraph<TAB>labels`, got {} fields",
                    fields.len()
                )));
            }
            let article = fields[0].trim();
            let paragraph: usize = fields[1]
                .trim()
                .parse()
                .ok()
                .filter(|&p| p >= 1)
                .ok_or_else(|| err(format!("bad paragraph index {:?}", fields[1])))?;
            (
                format!("{article}#{paragraph}"),
                fields.get(2).copied().unwrap_or(""),
            )
        } else {
            if !(1..=2).contains(&fields.len()) {
                return Err(err(format!(
                    "expected `article_id<TAB>labels`, got {} fields",
                    fields.len()
                )));
            }
            (
                fields[0].trim().to_string(),
                fields.get(1).copied().unwrap_or(""),
            )
        };
        if unit_id.is_empty() || unit_id.starts_with('#') {
            return Err(err("empty article id".into()));
        }
        let labels: BTreeSet<String> = label_field
            .split(',')
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        if let Some(unknown) = labels.iter().find(|l| !space.contains(l)) {
            return Err(CorpusError::UnknownLabel {
                path: origin.to_path_buf(),
                line,
                label: unknown.clone(),
            });
        }
        if space.kind() == LabelKind::Multiclass && labels.len() != 1 {
            return Err(err(format!(
                "multiclass row needs exactly one label, found {}",
                labels.len()
            )));
        }
        if out.contains_key(&unit_id) {
            return Err(err(format!("duplicate unit {unit_id:?}")));
        }
        out.insert(unit_id, labels);
    }
    Ok(out)
}

/// Renders rows in the label TSV format; the inverse of [`parse_labels_str`].
pub fn render_labels<'a, I>(subtask: Subtask, rows: I) -> Result<String>
where
    I: IntoIterator<Item = (&'a str, &'a BTreeSet<String>)>,
{
    let mut out = String::new();
    for (unit_id, labels) in rows {
        if subtask.is_paragraph_level() {
            let (article, paragraph) = split_paragraph_unit(unit_id)?;
            out.push_str(article);
            out.push('\t');
            out.push_str(&paragraph.to_string());
        } else {
            out.push_str(unit_id);
        }
        out.push('\t');
        out.push_str(&labels.iter().map(String::as_str).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_labels<'a, I>(path: &Path, subtask: Subtask, rows: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a BTreeSet<String>)>,
{
    let body = render_labels(subtask, rows)?;
    fs::write(path, body).map_err(|e| CorpusError::io(path, e))
}

/// `"12#3"` → `("12", 3)`.
pub(crate) fn split_paragraph_unit(unit_id: &str) -> Result<(&str, usize)> {
    unit_id
        .rsplit_once('#')
        .and_then(|(a, p)| Some((a, p.parse::<usize>().ok().filter(|&p| p >= 1)?)))
        .filter(|(a, _)| !a.is_empty())
        .ok_or_else(|| {
            CorpusError::Validation(format!(
                "paragraph unit id {unit_id:?} is not `<article>#<index>`"
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(subtask: Subtask) -> LabelSpace {
        let labels = match subtask {
            Subtask::S1 => vec!["opinion", "reporting", "satire"],
            _ => return LabelSpace::custom(subtask, LabelKind::Multilabel, (0..subtask.label_count()).map(|i| format!("T{i}")).collect()).unwrap(),
        };
        LabelSpace::new(subtask, LabelKind::Multiclass, labels.into_iter().map(String::from).collect()).unwrap()
    }

    fn parse(text: &str, subtask: Subtask) -> Result<LabelMap> {
        parse_labels_str(text, Path::new("labels.tsv"), &space(subtask))
    }

    #[test]
    fn multiclass_row() {
        let map = parse("12\topinion\n", Subtask::S1).unwrap();
        assert_eq!(map["12"], BTreeSet::from(["opinion".to_string()]));
    }

    #[test]
    fn empty_multilabel_set_for_paragraph() {
        let map = parse("12\t3\t\n", Subtask::S3).unwrap();
        assert!(map["12#3"].is_empty());
        // a missing trailing field reads the same way
        assert!(parse("12\t3\n", Subtask::S3).unwrap()["12#3"].is_empty());
    }

    #[test]
    fn multiclass_cardinality_is_enforced() {
        let err = parse("12\tsatire,opinion\n", Subtask::S1).unwrap_err();
        assert!(err.to_string().contains("exactly one"), "{err}");
        assert!(parse("12\t\n", Subtask::S1).is_err());
    }

    #[test]
    fn unknown_label_names_label_and_line() {
        let err = parse("1\topinion\n2\tgossip\n", Subtask::S1).unwrap_err();
        match err {
            CorpusError::UnknownLabel { line, label, .. } => {
                assert_eq!(line, 2);
                assert_eq!(label, "gossip");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn duplicate_units_rejected() {
        assert!(parse("1\topinion\n1\tsatire\n", Subtask::S1).is_err());
        assert!(parse("1\t2\tT0\n1\t2\tT1\n", Subtask::S3).is_err());
    }

    #[test]
    fn bad_paragraph_index() {
        assert!(parse("1\t0\tT0\n", Subtask::S3).is_err());
        assert!(parse("1\tx\tT0\n", Subtask::S3).is_err());
    }

    #[test]
    fn rows_keep_file_order_and_render_back() {
        let text = "9\t2\tT1,T0\n3\t1\t\n";
        let map = parse(text, Subtask::S3).unwrap();
        let keys: Vec<_> = map.keys().map(String::as_str).collect();
        assert_eq!(keys, ["9#2", "3#1"]);
        let rendered =
            render_labels(Subtask::S3, map.iter().map(|(k, v)| (k.as_str(), v))).unwrap();
        assert_eq!(rendered, "9\t2\tT0,T1\n3\t1\t\n");
    }

    #[test]
    fn label_space_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s1.tsv");
        fs::write(&path, "subtask1\tmulticlass\nopinion\nreporting\nsatire\n").unwrap();
        let s = load_label_space(&path).unwrap();
        assert_eq!(s.labels(), ["opinion", "reporting", "satire"]);

        let labels: String = (0..13).map(|i| format!("F{i}\n")).collect();
        fs::write(&path, format!("subtask2\tmultilabel\n{labels}")).unwrap();
        let err = load_label_space(&path).unwrap_err();
        assert!(err.to_string().contains("expected 14"), "{err}");

        let labels: String = (0..23).map(|i| format!("T{i}\n")).collect();
        fs::write(&path, format!("subtask3\tmultilabel\n{labels}")).unwrap();
        let s3 = load_label_space(&path).unwrap();
        assert_eq!(s3.len(), 23);
        write_label_space(&path, &s3).unwrap();
        assert_eq!(load_label_space(&path).unwrap(), s3);
    }

    #[test]
    fn bundled_label_spaces() {
        for st in Subtask::ALL {
            let sp = official_label_space(st);
            assert_eq!(sp.len(), st.label_count());
            assert_eq!(sp.kind(), st.kind());
        }
        assert_eq!(official_label_space(Subtask::S1).labels(), ["opinion", "reporting", "satire"]);
    }

    #[test]
    fn split_paragraph_ids() {
        assert_eq!(split_paragraph_unit("12#3").unwrap(), ("12", 3));
        assert_eq!(split_paragraph_unit("en:1#2#4").unwrap(), ("en:1#2", 4));
        assert!(split_paragraph_unit("12").is_err());
        assert!(split_paragraph_unit("#1").is_err());
    }
}
