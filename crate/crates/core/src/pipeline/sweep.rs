use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use super::manifest::{dataset_digest, now, persist_manifest, write_json_atomic};
use super::predict::evaluate;
use super::{input_hash, PipelineError, Result, RunManifest, Setup, SweepSummary, SCHEMA_VERSION};
use crate::classifier::{save_model, train, tune_thresholds, FeaturizerConfig, TrainConfig};
use crate::corpus::{Dataset, LabelKind, Subtask};
use crate::metrics::official_measure;
use crate::seed::derive_seed;

/// Inputs of one sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepData<'a> {
    pub subtask: Subtask,
    /// Language slot the runs are filed under.
    pub language: &'a str,
    pub setup: Setup,
    pub train: &'a Dataset,
    pub validation: &'a Dataset,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub best: RunManifest,
    pub best_dir: PathBuf,
    pub manifests: Vec<RunManifest>,
    pub summary: SweepSummary,
}

pub const MODEL_FILE: &str = "model.bin";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SWEEP_FILE: &str = "sweep.json";

pub fn seed_dir(store: &Path, index: usize) -> PathBuf {
    store.join(format!("seed{index}"))
}

fn run_one(
    data: &SweepData<'_>,
    cfg: &TrainConfig,
    featurizer: &FeaturizerConfig,
    root_seed: u64,
    index: usize,
    digests: &(String, String),
    dir: &Path,
) -> Result<RunManifest> {
    let seed = derive_seed(
        root_seed,
        &[
            data.subtask.as_str().into(),
            data.language.into(),
            data.setup.as_str().into(),
            index.into(),
        ],
    );
    let metric = official_measure(data.subtask);
    let hash = input_hash(&json!({
        "subtask": data.subtask,
        "language": data.language,
        "setup": data.setup,
        "seed_index": index,
        "seed": seed,
        "train_cfg": cfg,
        "featurizer": featurizer,
        "train": digests.0,
        "validation": digests.1,
    }));
    let mut manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        subtask: data.subtask,
        language: data.language.to_string(),
        setup: data.setup,
        seed_index: index,
        seed,
        train_cfg: cfg.clone(),
        featurizer: featurizer.clone(),
        model_path: None,
        metric,
        validation_score: None,
        dev_scores: Default::default(),
        epoch_losses: Vec::new(),
        error: None,
        created_at: now(),
        input_hash: hash,
    };
    let attempt = || -> Result<(f64, Vec<f64>)> {
        let mut outcome = train(data.train, cfg, featurizer, seed)?;
        if cfg.threshold_sweep && outcome.model.kind() == LabelKind::Multilabel {
            tune_thresholds(&mut outcome.model, data.validation)?;
        }
        let score = evaluate(&outcome.model, data.validation)?.value(metric);
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        save_model(&dir.join(MODEL_FILE), &outcome.model)?;
        Ok((score, outcome.epoch_losses))
    };
    match attempt() {
        Ok((score, losses)) => {
            manifest.model_path = Some(MODEL_FILE.to_string());
            manifest.validation_score = Some(score);
            manifest.epoch_losses = losses;
        }
        Err(e) => {
            log::warn!("{}/{}/{} seed {index} failed: {e}", data.subtask, data.language, data.setup);
            let _ = fs::remove_file(dir.join(MODEL_FILE));
            manifest.error = Some(e.to_string());
        }
    }
    persist_manifest(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Trains `cfg.k_seeds` models, scores each on validation with the subtask's
/// official measure and keeps the best (ties go to the lowest seed index).
/// Every run is persisted under `store/seed<k>/`, and the outcome under
/// `store/sweep.json`. Seeds run on the ambient rayon pool; the outcome does
/// not depend on scheduling.
pub fn run_seed_sweep(
    data: &SweepData<'_>,
    cfg: &TrainConfig,
    featurizer: &FeaturizerConfig,
    root_seed: u64,
    store: &Path,
) -> Result<SweepOutcome> {
    cfg.validate()?;
    featurizer.validate()?;
    if data.train.subtask() != data.subtask || data.validation.subtask() != data.subtask {
        return Err(PipelineError::Config(format!(
            "sweep for {} received data of another subtask",
            data.subtask
        )));
    }
    fs::create_dir_all(store).map_err(|e| PipelineError::io(store, e))?;
    let digests = (dataset_digest(data.train), dataset_digest(data.validation));
    let manifests: Vec<RunManifest> = (0..cfg.k_seeds)
        .into_par_iter()
        .map(|i| run_one(data, cfg, featurizer, root_seed, i, &digests, &seed_dir(store, i)))
        .collect::<Result<_>>()?;

    // Drop leftovers of earlier sweeps with a larger k.
    let mut extra = cfg.k_seeds;
    while seed_dir(store, extra).exists() {
        let d = seed_dir(store, extra);
        fs::remove_dir_all(&d).map_err(|e| PipelineError::io(&d, e))?;
        extra += 1;
    }

    let mut best: Option<&RunManifest> = None;
    for m in manifests.iter().filter(|m| m.succeeded()) {
        if best.is_none_or(|b| m.validation_score > b.validation_score) {
            best = Some(m);
        }
    }
    let Some(best) = best.cloned() else {
        return Err(PipelineError::AllSeedsFailed {
            subtask: data.subtask,
            language: data.language.to_string(),
            setup: data.setup,
            errors: manifests.iter().filter_map(|m| m.error.clone()).collect(),
        });
    };
    let summary = SweepSummary {
        schema_version: SCHEMA_VERSION,
        subtask: data.subtask,
        language: data.language.to_string(),
        setup: data.setup,
        k: cfg.k_seeds,
        metric: best.metric,
        validation_scores: manifests.iter().map(|m| m.validation_score).collect(),
        best_index: best.seed_index,
        best_manifest: format!("seed{}/{MANIFEST_FILE}", best.seed_index),
    };
    write_json_atomic(&store.join(SWEEP_FILE), &summary)?;
    Ok(SweepOutcome {
        best_dir: seed_dir(store, best.seed_index),
        best,
        manifests,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabelSpace, LabeledInstance};
    use crate::pipeline::load_manifest;

    fn data(n: usize, offset: usize) -> Dataset {
        let space = LabelSpace::custom(
            Subtask::S1,
            LabelKind::Multiclass,
            vec!["opinion".into(), "reporting".into(), "satire".into()],
        )
        .unwrap();
        let keys = ["think", "said", "lol"];
        let inst = (0..n)
            .map(|i| {
                let c = (i + offset) % 3;
                LabeledInstance::new(format!("{}", i + offset * 1000), format!("w{} {} w{}", i % 4, keys[c], i % 3), [space.labels()[c].clone()])
            })
            .collect();
        Dataset::new(Subtask::S1, ["en".to_string()].into(), inst, space).unwrap()
    }

    fn small_cfg(k: usize) -> TrainConfig {
        TrainConfig {
            k_seeds: k,
            epochs: 3,
            ..Default::default()
        }
    }

    fn feat() -> FeaturizerConfig {
        FeaturizerConfig {
            hash_dim: 1 << 10,
            ..Default::default()
        }
    }

    #[test]
    fn persists_every_seed_and_marks_best() {
        let dir = tempfile::tempdir().unwrap();
        let (tr, va) = (data(30, 0), data(9, 1));
        let d = SweepData {
            subtask: Subtask::S1,
            language: "en",
            setup: Setup::Mono,
            train: &tr,
            validation: &va,
        };
        let out = run_seed_sweep(&d, &small_cfg(4), &feat(), 1, dir.path()).unwrap();
        assert_eq!(out.manifests.len(), 4);
        for i in 0..4 {
            let m = load_manifest(&seed_dir(dir.path(), i).join(MANIFEST_FILE)).unwrap();
            assert_eq!(m.seed_index, i);
            assert!(seed_dir(dir.path(), i).join(MODEL_FILE).exists());
        }
        let max = out
            .manifests
            .iter()
            .filter_map(|m| m.validation_score)
            .fold(f64::MIN, f64::max);
        assert_eq!(out.best.validation_score, Some(max));
        let first_max = out.manifests.iter().position(|m| m.validation_score == Some(max)).unwrap();
        assert_eq!(out.best.seed_index, first_max);

        // Identical rerun: byte-identical manifests and models.
        let before = fs::read(seed_dir(dir.path(), 1).join(MANIFEST_FILE)).unwrap();
        let model = fs::read(seed_dir(dir.path(), 1).join(MODEL_FILE)).unwrap();
        run_seed_sweep(&d, &small_cfg(4), &feat(), 1, dir.path()).unwrap();
        assert_eq!(fs::read(seed_dir(dir.path(), 1).join(MANIFEST_FILE)).unwrap(), before);
        assert_eq!(fs::read(seed_dir(dir.path(), 1).join(MODEL_FILE)).unwrap(), model);

        // Smaller k: leftovers removed.
        let again = run_seed_sweep(&d, &small_cfg(2), &feat(), 1, dir.path()).unwrap();
        assert!(!seed_dir(dir.path(), 2).exists());
        assert_eq!(again.summary.k, 2);
    }

    #[test]
    fn sweep_is_independent_of_thread_count() {
        let (tr, va) = (data(30, 0), data(9, 1));
        let d = SweepData {
            subtask: Subtask::S1,
            language: "en",
            setup: Setup::Mono,
            train: &tr,
            validation: &va,
        };
        let run = |threads: usize| {
            let dir = tempfile::tempdir().unwrap();
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let out = pool.install(|| run_seed_sweep(&d, &small_cfg(5), &feat(), 9, dir.path())).unwrap();
            (out.summary, fs::read(seed_dir(dir.path(), 3).join(MODEL_FILE)).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn all_failing_seeds_fail_the_sweep() {
        let dir = tempfile::tempdir().unwrap();
        let va = data(6, 0);
        let empty = Dataset::new(Subtask::S1, va.languages().clone(), vec![], va.label_space().clone()).unwrap();
        let d = SweepData {
            subtask: Subtask::S1,
            language: "en",
            setup: Setup::Aug,
            train: &empty,
            validation: &va,
        };
        match run_seed_sweep(&d, &small_cfg(2), &feat(), 0, dir.path()) {
            Err(PipelineError::AllSeedsFailed { errors, .. }) => assert_eq!(errors.len(), 2),
            other => panic!("{other:?}"),
        }
        let m = load_manifest(&seed_dir(dir.path(), 1).join(MANIFEST_FILE)).unwrap();
        assert!(m.error.unwrap().contains("empty"));
    }
}
