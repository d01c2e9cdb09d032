use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_newsclass"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Synthetic corpus with a small config; returns the config path.
fn synth(dir: &Path, articles: usize) -> PathBuf {
    let out = dir.to_str().unwrap();
    let n = articles.to_string();
    let o = run(&["synth", "--out", out, "--train-articles", &n]);
    assert!(o.status.success(), "{}", stderr(&o));
    PathBuf::from(stdout(&o).trim())
}

fn tree_bytes(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn split_writes_80_20_and_is_idempotent() {
    let dir = TempDir::new().unwrap();
    let cfg = synth(dir.path(), 100);
    let c = cfg.to_str().unwrap();
    let o = run(&["-c", c, "split", "-s", "1", "-l", "en"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!((m["n_train"].as_u64(), m["n_validation"].as_u64()), (Some(80), Some(20)));

    let splits = dir.path().join("work/splits");
    let before = tree_bytes(&splits);
    let again = run(&["-c", c, "split", "-s", "1", "-l", "en"]);
    assert!(again.status.success());
    assert_eq!(stdout(&again), stdout(&o));
    assert_eq!(tree_bytes(&splits), before);
}

#[test]
fn missing_labels_file_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let cfg = synth(dir.path(), 10);
    let labels = dir.path().join("data/en/train-labels-subtask-1.txt");
    fs::remove_file(&labels).unwrap();
    let o = run(&["-c", cfg.to_str().unwrap(), "split", "-s", "1", "-l", "en"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("train-labels-subtask-1.txt"), "{}", stderr(&o));
}

#[test]
fn missing_config_is_an_input_error() {
    let o = run(&["-c", "/nonexistent/experiment.toml", "split", "-s", "1", "-l", "en"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/experiment.toml"));
}

#[test]
fn sweep_prints_best_manifest_and_repeats_identically() {
    let dir = TempDir::new().unwrap();
    let cfg = synth(dir.path(), 20);
    let c = cfg.to_str().unwrap();
    assert!(run(&["-c", c, "split", "-s", "1", "-l", "en"]).status.success());
    let o = run(&["-c", c, "sweep", "-s", "1", "-l", "en", "--setup", "mono"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let best = PathBuf::from(stdout(&o).trim());
    assert!(best.ends_with("manifest.json"));
    let runs = best.parent().unwrap().parent().unwrap();
    let seeds = fs::read_dir(runs).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).count();
    assert_eq!(seeds, 10);

    let bytes = fs::read(&best).unwrap();
    let again = run(&["-c", c, "sweep", "-s", "1", "-l", "en", "--setup", "mono"]);
    assert_eq!(stdout(&again), stdout(&o));
    assert_eq!(fs::read(&best).unwrap(), bytes);
}

#[test]
fn sweep_without_split_fails_cleanly() {
    let dir = TempDir::new().unwrap();
    let cfg = synth(dir.path(), 10);
    let o = run(&["-c", cfg.to_str().unwrap(), "sweep", "-s", "1", "-l", "en", "--setup", "mono"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn evaluate_perfect_predictions() {
    let dir = TempDir::new().unwrap();
    let gold = write(dir.path(), "gold.txt", "1\topinion\n2\treporting\n3\tsatire\n");
    let o = run(&["evaluate", &gold, &gold, "-s", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("f1_macro\t1.000 (official)"), "{out}");
    assert!(out.contains("f1_micro\t1.000"), "{out}");
}

#[test]
fn evaluate_hand_counted_multilabel() {
    // Pairs: tp 2, fp 1, fn 1.
    let dir = TempDir::new().unwrap();
    let gold = write(dir.path(), "gold.txt", "1\tEconomic,Morality\n2\tPolitical\n");
    let pred = write(dir.path(), "pred.txt", "1\tEconomic\n2\tMorality,Political\n");
    let o = run(&["evaluate", &gold, &pred, "-s", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("f1_micro\t0.667 (official)"), "{}", stdout(&o));
}

#[test]
fn evaluate_missing_prediction_lists_the_unit() {
    let dir = TempDir::new().unwrap();
    let gold = write(dir.path(), "gold.txt", "1\topinion\n2\treporting\n3\tsatire\n");
    let pred = write(dir.path(), "pred.txt", "1\topinion\n3\tsatire\n");
    let o = run(&["evaluate", &gold, &pred, "-s", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing predictions for 1 unit(s): 2"), "{}", stderr(&o));
}

#[test]
fn report_from_reference_rows() {
    let dir = TempDir::new().unwrap();
    let refs = write(
        dir.path(),
        "ref.tsv",
        "EN\t1\tMELODI\t0.784\t0.815\nEN\t17\tQCRI_multi\t0.281\t0.593\n",
    );
    let results = dir.path().join("results");
    let args = [
        "report",
        "--results",
        results.to_str().unwrap(),
        "-s",
        "1",
        "--reference",
        &refs,
    ];
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("EN       1  MELODI         0.784     0.815"), "{out}");
    assert!(out.contains("        17  QCRI_multi     0.281     0.593"), "{out}");
    assert_eq!(stdout(&run(&args)), out);
}

#[test]
fn report_without_results_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let o = run(&["report", "--results", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_lists_every_stage() {
    let out = stdout(&run(&["--help"]));
    for verb in ["split", "augment", "sweep", "select", "predict", "evaluate", "report", "run"] {
        assert!(out.contains(verb), "{verb} missing from help");
    }
}
