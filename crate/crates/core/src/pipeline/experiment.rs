//! Stage functions over an experiment config and the work-directory layout
//! they share:
//!
//! ```text
//! <work>/splits/<subtask>/<lang>/{train,validation,augmented}/  split.json
//! <work>/runs/<subtask>/<lang>/{mono,aug}/seed<k>/{manifest.json,model.bin}
//! <work>/runs/<subtask>/multilingual/multi/seed<k>/...
//! <work>/runs/<subtask>/<slot>/<setup>/sweep.json
//! <work>/runs/<subtask>/<lang>/official/manifest.json
//! <work>/predictions/<subtask>/<lang>.tsv
//! <work>/results/<subtask>/<lang>.json
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::manifest::{dataset_digest, persist_manifest, read_json, write_json_atomic};
use super::predict::{evaluate, produce_predictions, Predictor, RemotePredictor};
use super::report::{render_report, ReportFormat, ReportRow};
use super::sweep::{run_seed_sweep, SweepData, SweepOutcome, SWEEP_FILE};
use super::{
    input_hash, load_manifest, route_language, select_setup, ExperimentConfig, OfficialManifest,
    PipelineError, Result, Route, RunManifest, Setup, SplitManifest, SweepSummary, SCHEMA_VERSION,
};
use crate::augment::{augment_dataset, AugmentPlan, SynonymLexicon};
use crate::backend::{BackendHandle, MaskFiller, MULTILINGUAL};
use crate::classifier::{load_model, LinearModel};
use crate::corpus::{
    bind, merge_multilingual, parse_documents, parse_labels, read_dataset, split, units,
    write_dataset, Dataset, LabelSpace, SplitConfig, Subtask, Unit,
};
use crate::metrics::{official_measure, score_label_sets, EvalReport};
use crate::seed::derive_seed;
use crate::synth::{SURPRISE_LANGUAGES, TRAINING_LANGUAGES};

/// Language slot of the multilingual sweep.
pub const MULTI_LANGUAGE: &str = MULTILINGUAL;

/// Paths inside a work directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub work: PathBuf,
}

impl Layout {
    pub fn new(work: impl Into<PathBuf>) -> Self {
        Self { work: work.into() }
    }

    pub fn split_dir(&self, st: Subtask, lang: &str) -> PathBuf {
        self.work.join("splits").join(st.as_str()).join(lang)
    }

    pub fn train_dir(&self, st: Subtask, lang: &str) -> PathBuf {
        self.split_dir(st, lang).join("train")
    }

    pub fn validation_dir(&self, st: Subtask, lang: &str) -> PathBuf {
        self.split_dir(st, lang).join("validation")
    }

    pub fn augmented_dir(&self, st: Subtask, lang: &str) -> PathBuf {
        self.split_dir(st, lang).join("augmented")
    }

    pub fn split_manifest(&self, st: Subtask, lang: &str) -> PathBuf {
        self.split_dir(st, lang).join("split.json")
    }

    pub fn setup_dir(&self, st: Subtask, slot: &str, setup: Setup) -> PathBuf {
        self.work.join("runs").join(st.as_str()).join(slot).join(setup.as_str())
    }

    pub fn official_manifest(&self, st: Subtask, lang: &str) -> PathBuf {
        self.work
            .join("runs")
            .join(st.as_str())
            .join(lang)
            .join("official")
            .join("manifest.json")
    }

    pub fn predictions(&self, st: Subtask, lang: &str) -> PathBuf {
        self.work.join("predictions").join(st.as_str()).join(format!("{lang}.tsv"))
    }

    pub fn results_dir(&self) -> PathBuf {
        self.work.join("results")
    }

    pub fn result(&self, st: Subtask, lang: &str) -> PathBuf {
        self.results_dir().join(st.as_str()).join(format!("{lang}.json"))
    }

    fn relative(&self, p: &Path) -> String {
        p.strip_prefix(&self.work).unwrap_or(p).to_string_lossy().into_owned()
    }
}

/// Scores of one official run on a labeled split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub subtask: Subtask,
    pub language: String,
    pub run: String,
    pub setup: Setup,
    pub split: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub official: Vec<OfficialManifest>,
    pub predictions: Vec<PathBuf>,
    pub reports: Vec<PathBuf>,
}

fn articles_dir(cfg: &ExperimentConfig, lang: &str, split: &str, st: Subtask) -> PathBuf {
    cfg.data_dir()
        .join(lang)
        .join(format!("{split}-articles-subtask-{}", st.number()))
}

fn labels_file(cfg: &ExperimentConfig, lang: &str, split: &str, st: Subtask) -> PathBuf {
    cfg.data_dir()
        .join(lang)
        .join(format!("{split}-labels-subtask-{}.txt", st.number()))
}

fn load_labeled(
    cfg: &ExperimentConfig,
    lang: &str,
    split: &str,
    st: Subtask,
    space: &LabelSpace,
) -> Result<Dataset> {
    let docs = parse_documents(&articles_dir(cfg, lang, split, st), lang)?;
    let labels = parse_labels(&labels_file(cfg, lang, split, st), space)?;
    Ok(bind(&docs, &labels, st, space)?.dataset)
}

fn read_stage_dataset(dir: &Path, stage: &str) -> Result<Dataset> {
    if !dir.join("labels.tsv").exists() {
        return Err(PipelineError::Missing(format!(
            "{} (run the {stage} stage first)",
            dir.display()
        )));
    }
    Ok(read_dataset(dir)?)
}

fn require_training_language(cfg: &ExperimentConfig, lang: &str) -> Result<()> {
    if cfg.is_training_language(lang) {
        Ok(())
    } else {
        Err(PipelineError::Config(format!(
            "{lang:?} is not a training language of this experiment"
        )))
    }
}

/// Splits a language's training data 80/20 (or the configured fraction) into
/// train and validation.
pub fn stage_split(cfg: &ExperimentConfig, st: Subtask, lang: &str) -> Result<SplitManifest> {
    require_training_language(cfg, lang)?;
    let layout = Layout::new(cfg.work_dir());
    let space = cfg.label_space(st)?;
    let ds = load_labeled(cfg, lang, "train", st, &space)?;
    let split_cfg = SplitConfig {
        train_fraction: cfg.train_fraction,
        seed: derive_seed(cfg.root_seed, &["split".into(), st.as_str().into(), lang.into()]),
    };
    let (train, validation) = split(&ds, &split_cfg)?;
    write_dataset(&layout.train_dir(st, lang), &train)?;
    write_dataset(&layout.validation_dir(st, lang), &validation)?;
    let manifest = SplitManifest {
        schema_version: SCHEMA_VERSION,
        subtask: st,
        language: lang.to_string(),
        seed: split_cfg.seed,
        train_fraction: split_cfg.train_fraction,
        n_train: train.len(),
        n_validation: validation.len(),
        input_hash: input_hash(&json!({
            "data": dataset_digest(&ds),
            "seed": split_cfg.seed,
            "train_fraction": split_cfg.train_fraction,
        })),
    };
    write_json_atomic(&layout.split_manifest(st, lang), &manifest)?;
    Ok(manifest)
}

fn connect_backend(cfg: &ExperimentConfig, lang: &str) -> Result<BackendHandle> {
    let b = cfg
        .backend
        .as_ref()
        .ok_or_else(|| PipelineError::Config("no [backend] configured".into()))?;
    let entry = cfg.registry()?.resolve(lang);
    Ok(BackendHandle::connect(&b.command, &b.args, entry, b.timeout())?)
}

/// Augments the train side of a language's split.
pub fn stage_augment(cfg: &ExperimentConfig, st: Subtask, lang: &str, jobs: usize) -> Result<Dataset> {
    require_training_language(cfg, lang)?;
    let layout = Layout::new(cfg.work_dir());
    let train = read_stage_dataset(&layout.train_dir(st, lang), "split")?;
    let plan = AugmentPlan {
        seed: derive_seed(cfg.root_seed, &["augment".into(), st.as_str().into(), lang.into()]),
        ..cfg.augment.clone()
    };
    let lexicon = match (&cfg.paths.lexicon, plan.needs_lexicon()) {
        (Some(p), true) => Some(SynonymLexicon::load(&cfg.resolve(p))?),
        _ => None,
    };
    let backend = if plan.needs_backend() {
        Some(connect_backend(cfg, lang)?)
    } else {
        None
    };
    let augmented = augment_dataset(
        &train,
        &plan,
        lexicon.as_ref(),
        backend.as_ref().map(|h| h as &dyn MaskFiller),
        jobs,
    )?;
    write_dataset(&layout.augmented_dir(st, lang), &augmented)?;
    Ok(augmented)
}

fn slot(setup: Setup, lang: &str) -> &str {
    if setup == Setup::Multi {
        MULTI_LANGUAGE
    } else {
        lang
    }
}

/// Runs the seed sweep of one setup. The multi setup merges every training
/// language and ignores `lang`.
pub fn stage_sweep(cfg: &ExperimentConfig, st: Subtask, lang: &str, setup: Setup) -> Result<SweepOutcome> {
    let layout = Layout::new(cfg.work_dir());
    let (train, validation) = match setup {
        Setup::Mono | Setup::Aug => {
            require_training_language(cfg, lang)?;
            let train = if setup == Setup::Mono {
                read_stage_dataset(&layout.train_dir(st, lang), "split")?
            } else {
                read_stage_dataset(&layout.augmented_dir(st, lang), "augment")?
            };
            (train, read_stage_dataset(&layout.validation_dir(st, lang), "split")?)
        }
        Setup::Multi => {
            let mut trains = Vec::new();
            let mut vals = Vec::new();
            for l in &cfg.languages {
                trains.push(read_stage_dataset(&layout.train_dir(st, l), "split")?);
                vals.push(read_stage_dataset(&layout.validation_dir(st, l), "split")?);
            }
            (merge_multilingual(&trains)?, merge_multilingual(&vals)?)
        }
    };
    let data = SweepData {
        subtask: st,
        language: slot(setup, lang),
        setup,
        train: &train,
        validation: &validation,
    };
    let profile = cfg.profile();
    run_seed_sweep(
        &data,
        profile.get(st, setup),
        &cfg.featurizer,
        cfg.root_seed,
        &layout.setup_dir(st, data.language, setup),
    )
}

fn best_run(layout: &Layout, st: Subtask, slot: &str, setup: Setup) -> Result<(RunManifest, PathBuf)> {
    let dir = layout.setup_dir(st, slot, setup);
    let sweep_file = dir.join(SWEEP_FILE);
    if !sweep_file.exists() {
        return Err(PipelineError::Missing(format!(
            "{} (run the {setup} sweep first)",
            sweep_file.display()
        )));
    }
    let summary: SweepSummary = read_json(&sweep_file)?;
    let path = dir.join(&summary.best_manifest);
    Ok((load_manifest(&path)?, path))
}

fn load_run_model(manifest_path: &Path, m: &RunManifest) -> Result<LinearModel> {
    let rel = m.model_path.as_ref().ok_or_else(|| {
        PipelineError::Missing(format!("{} has no model", manifest_path.display()))
    })?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    Ok(load_model(&dir.join(rel))?)
}

/// Picks the official setup of a language: the best dev score among the
/// configured setups' best seeds, or multi for languages without training
/// data.
pub fn stage_select(cfg: &ExperimentConfig, st: Subtask, lang: &str) -> Result<OfficialManifest> {
    let layout = Layout::new(cfg.work_dir());
    let space = cfg.label_space(st)?;
    let metric = official_measure(st);
    let route = route_language(lang, &cfg.languages);
    let has_dev = labels_file(cfg, lang, "dev", st).exists();
    let candidates: Vec<Setup> = match route {
        Route::ForcedMulti => vec![Setup::Multi],
        Route::Unconstrained => Setup::ALL.into_iter().filter(|s| cfg.setups.contains(s)).collect(),
    };
    if route == Route::Unconstrained && !has_dev {
        return Err(PipelineError::Missing(format!(
            "{} (setup selection needs dev labels)",
            labels_file(cfg, lang, "dev", st).display()
        )));
    }
    let dev = if has_dev {
        Some(load_labeled(cfg, lang, "dev", st, &space)?)
    } else {
        None
    };
    let mut dev_scores = BTreeMap::new();
    let mut paths = BTreeMap::new();
    for setup in candidates {
        let (mut m, path) = best_run(&layout, st, slot(setup, lang), setup)?;
        if let Some(dev) = &dev {
            let model = load_run_model(&path, &m)?;
            let score = evaluate(&model, dev)?.value(metric);
            m.dev_scores.insert(lang.to_string(), score);
            persist_manifest(&path, &m)?;
            dev_scores.insert(setup, score);
        }
        paths.insert(setup, path);
    }
    let setup = match route {
        Route::ForcedMulti => Setup::Multi,
        Route::Unconstrained => select_setup(&dev_scores)?,
    };
    let official = OfficialManifest {
        schema_version: SCHEMA_VERSION,
        subtask: st,
        language: lang.to_string(),
        setup,
        surprise: route == Route::ForcedMulti,
        dev_scores,
        run_manifest: layout.relative(&paths[&setup]),
        predictions: layout.relative(&layout.predictions(st, lang)),
    };
    write_json_atomic(&layout.official_manifest(st, lang), &official)?;
    Ok(official)
}

fn load_units(cfg: &ExperimentConfig, lang: &str, split: &str, st: Subtask) -> Result<Vec<Unit>> {
    let docs = parse_documents(&articles_dir(cfg, lang, split, st), lang)?;
    Ok(units(&docs, st))
}

/// Writes the official run's test predictions; when test gold labels exist
/// the run is also scored and recorded under `results/`.
pub fn stage_predict(cfg: &ExperimentConfig, st: Subtask, lang: &str) -> Result<(PathBuf, Option<ResultRecord>)> {
    let layout = Layout::new(cfg.work_dir());
    let official_path = layout.official_manifest(st, lang);
    if !official_path.exists() {
        return Err(PipelineError::Missing(format!(
            "{} (run the select stage first)",
            official_path.display()
        )));
    }
    let official: OfficialManifest = read_json(&official_path)?;
    let run_path = layout.work.join(&official.run_manifest);
    let run = load_manifest(&run_path)?;
    let model = load_run_model(&run_path, &run)?;
    let test = load_units(cfg, lang, "test", st)?;
    let out = layout.predictions(st, lang);

    let remote = match &cfg.backend {
        Some(b) if b.classify => Some((connect_backend(cfg, slot(official.setup, lang))?, b.threshold)),
        _ => None,
    };
    let predictor: Box<dyn Predictor + '_> = match &remote {
        Some((handle, threshold)) => Box::new(RemotePredictor {
            handle,
            label_space: model.label_space().clone(),
            threshold: *threshold,
        }),
        None => Box::new(model.clone()),
    };
    produce_predictions(predictor.as_ref(), &test, st, &out)?;

    let gold = labels_file(cfg, lang, "test", st);
    let record = if gold.exists() {
        let report = evaluate_files(&gold, &out, &cfg.label_space(st)?)?;
        let record = ResultRecord {
            schema_version: SCHEMA_VERSION,
            subtask: st,
            language: lang.to_string(),
            run: cfg.run_name(official.setup),
            setup: official.setup,
            split: "test".into(),
            report,
        };
        write_json_atomic(&layout.result(st, lang), &record)?;
        Some(record)
    } else {
        None
    };
    Ok((out, record))
}

/// Scores a predictions file against a gold label file.
pub fn evaluate_files(gold: &Path, predictions: &Path, space: &LabelSpace) -> Result<EvalReport> {
    let gold = parse_labels(gold, space)?;
    let pred = parse_labels(predictions, space)?;
    Ok(score_label_sets(&gold, &pred, space)?)
}

fn language_rank(lang: &str) -> (usize, String) {
    let pos = TRAINING_LANGUAGES
        .iter()
        .chain(SURPRISE_LANGUAGES.iter())
        .position(|l| l.eq_ignore_ascii_case(lang))
        .unwrap_or(usize::MAX);
    (pos, lang.to_string())
}

/// Reads every result record under `dir`, ordered by subtask and language.
pub fn load_results(dir: &Path) -> Result<Vec<ResultRecord>> {
    let mut out = Vec::new();
    for st in Subtask::ALL {
        let sub = dir.join(st.as_str());
        if !sub.is_dir() {
            continue;
        }
        for entry in fs::read_dir(&sub).map_err(|e| PipelineError::io(&sub, e))? {
            let path = entry.map_err(|e| PipelineError::io(&sub, e))?.path();
            if path.extension().is_some_and(|e| e == "json") {
                out.push(read_json::<ResultRecord>(&path)?);
            }
        }
    }
    out.sort_by(|a, b| {
        a.subtask
            .cmp(&b.subtask)
            .then_with(|| language_rank(&a.language).cmp(&language_rank(&b.language)))
            .then_with(|| a.run.cmp(&b.run))
    });
    Ok(out)
}

pub fn report_rows(records: &[ResultRecord], st: Subtask) -> Vec<ReportRow> {
    records
        .iter()
        .filter(|r| r.subtask == st)
        .map(|r| ReportRow {
            language: r.language.to_uppercase(),
            rank: None,
            run: r.run.clone(),
            f1_macro: r.report.f1_macro,
            f1_micro: r.report.f1_micro,
        })
        .collect()
}

/// Runs every stage over the configured matrix. Independent cells run on the
/// ambient rayon pool; `jobs` sizes the augmentation workers.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let layout = Layout::new(cfg.work_dir());
    let mut summary = ExperimentSummary {
        official: Vec::new(),
        predictions: Vec::new(),
        reports: Vec::new(),
    };
    for &st in &cfg.subtasks {
        log::info!("{st}: splitting {} languages", cfg.languages.len());
        cfg.languages
            .par_iter()
            .map(|l| {
                stage_split(cfg, st, l)?;
                if cfg.setups.contains(&Setup::Aug) {
                    stage_augment(cfg, st, l, jobs)?;
                }
                Ok(())
            })
            .collect::<Result<Vec<()>>>()?;

        let mut cells: Vec<(&str, Setup)> = Vec::new();
        for setup in Setup::ALL.into_iter().filter(|s| cfg.setups.contains(s)) {
            if setup == Setup::Multi {
                cells.push((MULTI_LANGUAGE, setup));
            } else {
                cells.extend(cfg.languages.iter().map(|l| (l.as_str(), setup)));
            }
        }
        log::info!("{st}: {} sweeps", cells.len());
        cells
            .par_iter()
            .map(|&(l, setup)| stage_sweep(cfg, st, l, setup).map(|_| ()))
            .collect::<Result<Vec<()>>>()?;

        // Sequential: several languages update the shared multi manifest.
        for l in cfg.all_languages() {
            summary.official.push(stage_select(cfg, st, l)?);
        }
        let outs = cfg
            .all_languages()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|l| stage_predict(cfg, st, l))
            .collect::<Result<Vec<_>>>()?;
        summary.predictions.extend(outs.into_iter().map(|(p, _)| p));
    }

    let records = load_results(&layout.results_dir())?;
    for &st in &cfg.subtasks {
        let rows = report_rows(&records, st);
        if rows.is_empty() {
            continue;
        }
        for (format, ext) in [(ReportFormat::Aligned, "txt"), (ReportFormat::Tsv, "tsv")] {
            let path = layout.work.join(format!("report-{}.{ext}", st.as_str()));
            super::manifest::write_atomic(&path, render_report(st, &rows, format).as_bytes())?;
            summary.reports.push(path);
        }
    }
    Ok(summary)
}
