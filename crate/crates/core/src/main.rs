use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::LevelFilter;

use newsclass::augment::AugmentOp;
use newsclass::corpus::{load_label_space, official_label_space, LabelSpace, Subtask};
use newsclass::metrics::{official_measure, EvalReport, Metric};
use newsclass::pipeline::{
    evaluate_files, load_results, parse_reference_rows, render_report, report_rows,
    run_experiment, stage_augment, stage_predict, stage_select, stage_split, stage_sweep,
    ExperimentConfig, Layout, PipelineError, ReportFormat, ReportRow, Setup, MANIFEST_FILE,
};
use newsclass::synth::{self, SynthConfig};

const EXIT_INPUT: u8 = 2;
const EXIT_RUN: u8 = 3;

/// Multilingual news genre, framing and persuasion-technique classification.
///
/// Stages can be run one at a time (split, augment, sweep, select, predict)
/// or all together with `run`. Every stage reads the experiment config
/// (TOML; see README) and writes under its `paths.work_dir`.
#[derive(Debug, Parser)]
#[command(name = "newsclass", version)]
struct Cli {
    /// Experiment config file.
    #[arg(short, long, global = true, default_value = "experiment.toml")]
    config: PathBuf,
    /// Worker threads (default: number of logical processors).
    #[arg(short, long, global = true)]
    jobs: Option<usize>,
    /// Override the config's root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More logging (-v info, -vv debug, -vvv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Cell {
    /// Subtask: 1, 2, 3 (or subtask1, s2, ...).
    #[arg(long, short = 's')]
    subtask: Subtask,
    /// Language code.
    #[arg(long, short = 'l')]
    language: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Aligned,
    Tsv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split a language's train subset 80/20 into train and validation.
    Split(Cell),
    /// Augment a language's train split.
    Augment(Cell),
    /// Train k seeds for one setup and print the best run's manifest path.
    Sweep {
        #[command(flatten)]
        cell: Cell,
        /// mono, multi or aug. The multi setup is shared by all languages.
        #[arg(long)]
        setup: Setup,
    },
    /// Pick a language's official setup on dev data and print its manifest path.
    Select(Cell),
    /// Write test predictions with the official model and print their path.
    Predict(Cell),
    /// Score a predictions file against gold labels.
    Evaluate {
        gold: PathBuf,
        predictions: PathBuf,
        #[arg(long, short = 's')]
        subtask: Subtask,
        /// Label inventory file (default: the bundled one).
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Render the leaderboard from persisted results.
    Report {
        /// Results directory (default: `<work_dir>/results`).
        #[arg(long)]
        results: Option<PathBuf>,
        /// Only this subtask (default: every subtask with results).
        #[arg(long, short = 's')]
        subtask: Option<Subtask>,
        /// Extra rows to rank alongside ours (TSV: language, rank, run, F1_macro, F1_micro).
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "aligned")]
        format: FormatArg,
    },
    /// Run every stage over the configured matrix.
    Run,
    /// Generate a small synthetic corpus plus a matching experiment config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        train_articles: usize,
        #[arg(long, default_value_t = 20)]
        dev_articles: usize,
        #[arg(long, default_value_t = 20)]
        test_articles: usize,
        #[arg(long, default_value_t = 7)]
        corpus_seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        2 => LevelFilter::Debug,
        _ => LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let input = err
                .downcast_ref::<PipelineError>()
                .is_none_or(PipelineError::is_input_error);
            ExitCode::from(if input { EXIT_INPUT } else { EXIT_RUN })
        }
    }
}

fn jobs(cli: &Cli) -> usize {
    cli.jobs
        .filter(|&j| j > 0)
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, PipelineError> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.root_seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let jobs = jobs(&cli);
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| anyhow::anyhow!("cannot start worker pool: {e}"))?;

    match &cli.command {
        Command::Evaluate {
            gold,
            predictions,
            subtask,
            labels,
        } => {
            let space = match labels {
                Some(p) => load_label_space(p).map_err(PipelineError::from)?,
                None => official_label_space(*subtask),
            };
            let report = evaluate_files(gold, predictions, &space)?;
            print!("{}", render_eval(&report, &space));
        }
        Command::Synth {
            out,
            train_articles,
            dev_articles,
            test_articles,
            corpus_seed,
        } => {
            let path = write_synth(out, *train_articles, *dev_articles, *test_articles, *corpus_seed)?;
            println!("{}", path.display());
        }
        Command::Report {
            results,
            subtask,
            reference,
            format,
        } => {
            let dir = match results {
                Some(d) => d.clone(),
                None => Layout::new(load_config(&cli)?.work_dir()).results_dir(),
            };
            let extra = match reference {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| PipelineError::io(p, e))?;
                    parse_reference_rows(&text)?
                }
                None => Vec::new(),
            };
            let format = match format {
                FormatArg::Aligned => ReportFormat::Aligned,
                FormatArg::Tsv => ReportFormat::Tsv,
            };
            print!("{}", report(&dir, *subtask, extra, format)?);
        }
        command => {
            let cfg = load_config(&cli)?;
            staged(&cfg, command, jobs)?;
        }
    }
    Ok(())
}

fn staged(cfg: &ExperimentConfig, command: &Command, jobs: usize) -> Result<(), PipelineError> {
    match command {
        Command::Split(c) => {
            let m = stage_split(cfg, c.subtask, &c.language)?;
            println!("{}", serde_json::to_string(&m).expect("manifest serializes"));
        }
        Command::Augment(c) => {
            let d = stage_augment(cfg, c.subtask, &c.language, jobs)?;
            println!(
                "{}",
                Layout::new(cfg.work_dir()).augmented_dir(c.subtask, &c.language).display()
            );
            log::info!("{} augmented instances", d.len());
        }
        Command::Sweep { cell, setup } => {
            let out = stage_sweep(cfg, cell.subtask, &cell.language, *setup)?;
            println!("{}", out.best_dir.join(MANIFEST_FILE).display());
        }
        Command::Select(c) => {
            let m = stage_select(cfg, c.subtask, &c.language)?;
            log::info!("{} {}: {}", c.subtask, c.language, m.setup);
            println!(
                "{}",
                Layout::new(cfg.work_dir()).official_manifest(c.subtask, &c.language).display()
            );
        }
        Command::Predict(c) => {
            let (path, result) = stage_predict(cfg, c.subtask, &c.language)?;
            if let Some(r) = result {
                let m = official_measure(c.subtask);
                log::info!("{} {}: {m} {:.3}", c.subtask, c.language, r.report.value(m));
            }
            println!("{}", path.display());
        }
        Command::Run => {
            let summary = run_experiment(cfg, jobs)?;
            for p in summary.predictions.iter().chain(&summary.reports) {
                println!("{}", p.display());
            }
        }
        Command::Evaluate { .. } | Command::Report { .. } | Command::Synth { .. } => {
            unreachable!("handled without a config")
        }
    }
    Ok(())
}

fn render_eval(report: &EvalReport, space: &LabelSpace) -> String {
    let official = official_measure(report.subtask);
    let mut out = format!("subtask\t{}\ninstances\t{}\n", report.subtask, report.n_instances);
    for m in [official, other(official)] {
        let mark = if m == official { " (official)" } else { "" };
        out.push_str(&format!("{m}\t{:.3}{mark}\n", report.value(m)));
    }
    out.push_str("\nlabel\tprecision\trecall\tf1\tsupport\n");
    for label in space.labels() {
        if let Some(s) = report.per_label.get(label.as_str()) {
            out.push_str(&format!(
                "{label}\t{:.3}\t{:.3}\t{:.3}\t{}\n",
                s.precision, s.recall, s.f1, s.support
            ));
        }
    }
    out
}

fn other(m: Metric) -> Metric {
    match m {
        Metric::F1Macro => Metric::F1Micro,
        Metric::F1Micro => Metric::F1Macro,
    }
}

fn report(
    dir: &Path,
    only: Option<Subtask>,
    extra: Vec<ReportRow>,
    format: ReportFormat,
) -> Result<String, PipelineError> {
    let records = if dir.is_dir() { load_results(dir)? } else { Vec::new() };
    let subtasks: Vec<Subtask> = match only {
        Some(st) => vec![st],
        None => Subtask::ALL
            .into_iter()
            .filter(|st| records.iter().any(|r| r.subtask == *st))
            .collect(),
    };
    if subtasks.is_empty() && extra.is_empty() {
        return Err(PipelineError::Missing(format!("no results under {}", dir.display())));
    }
    let subtasks = if subtasks.is_empty() { vec![Subtask::S1] } else { subtasks };
    let mut out = String::new();
    for (i, st) in subtasks.iter().enumerate() {
        let mut rows = report_rows(&records, *st);
        if only.is_some() || subtasks.len() == 1 {
            rows.extend(extra.iter().cloned());
        }
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&render_report(*st, &rows, format));
    }
    Ok(out)
}

fn write_synth(
    out: &Path,
    train_articles: usize,
    dev_articles: usize,
    test_articles: usize,
    seed: u64,
) -> anyhow::Result<PathBuf> {
    let data = out.join("data");
    let scfg = SynthConfig {
        train_articles,
        dev_articles,
        test_articles,
        seed,
        ..SynthConfig::default()
    };
    let summary = synth::generate(&data, &scfg).map_err(PipelineError::from)?;
    log::info!("{} articles under {}", summary.articles, data.display());

    let mut cfg = ExperimentConfig::new("data", "work");
    cfg.paths.lexicon = Some(PathBuf::from("data/lexicon.tsv"));
    cfg.featurizer.hash_dim = 1 << 12;
    cfg.augment.ops.insert(0, AugmentOp::SynonymReplace);
    cfg.validate()?;
    let path = out.join("experiment.toml");
    fs::write(&path, cfg.to_toml()).map_err(|e| PipelineError::io(&path, e))?;
    Ok(path)
}
