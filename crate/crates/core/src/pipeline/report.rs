use std::fmt::Write;

use super::{PipelineError, Result};
use crate::corpus::Subtask;
use crate::metrics::{official_measure, Metric};

/// One leaderboard row. Rows without a rank are ranked within their language
/// block by the official measure (equal scores share a rank).
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub language: String,
    pub rank: Option<usize>,
    pub run: String,
    pub f1_macro: f64,
    pub f1_micro: f64,
}

impl ReportRow {
    fn value(&self, m: Metric) -> f64 {
        match m {
            Metric::F1Macro => self.f1_macro,
            Metric::F1Micro => self.f1_micro,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Aligned,
    Tsv,
}

fn metric_header(m: Metric) -> &'static str {
    match m {
        Metric::F1Macro => "F1_macro",
        Metric::F1Micro => "F1_micro",
    }
}

/// Per-language blocks in order of first appearance; within a block rows are
/// sorted by rank, then run name. The official measure is the first score
/// column.
pub fn render_report(subtask: Subtask, rows: &[ReportRow], format: ReportFormat) -> String {
    let official = official_measure(subtask);
    let other = match official {
        Metric::F1Macro => Metric::F1Micro,
        Metric::F1Micro => Metric::F1Macro,
    };

    let mut languages: Vec<&str> = Vec::new();
    for r in rows {
        if !languages.contains(&r.language.as_str()) {
            languages.push(&r.language);
        }
    }
    let blocks: Vec<Vec<(usize, &ReportRow)>> = languages
        .iter()
        .map(|lang| {
            let block: Vec<&ReportRow> = rows.iter().filter(|r| r.language == *lang).collect();
            let mut ranked: Vec<(usize, &ReportRow)> = block
                .iter()
                .map(|r| {
                    let rank = r.rank.unwrap_or_else(|| {
                        1 + block
                            .iter()
                            .filter(|o| o.value(official) > r.value(official))
                            .count()
                    });
                    (rank, *r)
                })
                .collect();
            ranked.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.run.cmp(&b.1.run)));
            ranked
        })
        .collect();

    let headers = ["Lang", "Rank", "Run", metric_header(official), metric_header(other)];
    let mut out = String::new();
    match format {
        ReportFormat::Tsv => {
            out.push_str(&headers.join("\t"));
            out.push('\n');
            for (rank, r) in blocks.iter().flatten() {
                let _ = writeln!(
                    out,
                    "{}\t{rank}\t{}\t{:.3}\t{:.3}",
                    r.language,
                    r.run,
                    r.value(official),
                    r.value(other)
                );
            }
        }
        ReportFormat::Aligned => {
            let flat = blocks.iter().flatten();
            let lang_w = flat.clone().map(|(_, r)| r.language.len()).chain([4]).max().unwrap();
            let rank_w = flat.clone().map(|(k, _)| k.to_string().len()).chain([4]).max().unwrap();
            let run_w = flat.map(|(_, r)| r.run.len()).chain([3]).max().unwrap();
            let width = lang_w + rank_w + run_w + 8 + 8 + 4 * 2;
            let rule = "-".repeat(width);
            let _ = writeln!(
                out,
                "{:<lang_w$}  {:>rank_w$}  {:<run_w$}  {:>8}  {:>8}",
                headers[0], headers[1], headers[2], headers[3], headers[4]
            );
            out.push_str(&rule);
            out.push('\n');
            for block in &blocks {
                for (i, (rank, r)) in block.iter().enumerate() {
                    let lang = if i == 0 { r.language.as_str() } else { "" };
                    let _ = writeln!(
                        out,
                        "{lang:<lang_w$}  {rank:>rank_w$}  {:<run_w$}  {:>8.3}  {:>8.3}",
                        r.run,
                        r.value(official),
                        r.value(other)
                    );
                }
                out.push_str(&rule);
                out.push('\n');
            }
        }
    }
    out
}

/// Parses reference rows: `language<TAB>rank<TAB>run<TAB>f1_macro<TAB>f1_micro`
/// per line. Blank lines and `#` comments are skipped; the rank may be `-`.
pub fn parse_reference_rows(text: &str) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: &str| PipelineError::Config(format!("reference row {}: {m}", i + 1));
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        if f.len() != 5 {
            return Err(bad("expected 5 tab-separated fields"));
        }
        let rank = match f[1] {
            "-" | "" => None,
            r => Some(r.parse().map_err(|_| bad("bad rank"))?),
        };
        let score = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| (0.0..=1.0).contains(v))
                .ok_or_else(|| bad("scores must be numbers in [0, 1]"))
        };
        rows.push(ReportRow {
            language: f[0].to_string(),
            rank,
            run: f[2].to_string(),
            f1_macro: score(f[3])?,
            f1_micro: score(f[4])?,
        });
    }
    Ok(rows)
}
