//! The `qtl` command line: configuration, checkpoints, reports and the
//! subcommands that tie the pipeline together.

pub mod checkpoint;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use crate::data::{load_dataset, split, synth_generate, ImageSample, SynthConfig, TEST_FRACTION};
use crate::dqn::DressedQuantumNet;
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::models::{build_baseline, CtlHead, Trainable, TransferModel};
use crate::pipeline::{
    evaluate, grid_search, model_seeds, train_with_progress, Examples, GridOptions, ResultRecord, RunTag, TrainConfig,
    TrainReport,
};
use crate::quantum::{build_ansatz, Backend, NoiseModel};
use checkpoint::Model;
use config::{DataSource, ModelSpec, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "qtl",
    version,
    about = "Quantum and classical transfer learning on frozen CNN features"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum HeadMode {
    Ctl,
    Qtl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Ideal,
    Noisy,
}

#[derive(clap::Args, Debug)]
struct ConfigArgs {
    /// Run configuration (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic image set and its manifest.
    Synth {
        #[arg(long)]
        patients: u32,
        #[arg(long = "per-patient")]
        per_patient: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        signal: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the baseline CNN for its short epoch budget.
    TrainBaseline {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Freeze a baseline checkpoint and train a new head on its features.
    Finetune {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum)]
        mode: HeadMode,
        /// Baseline checkpoint; defaults to `<output_dir>/baseline.qtlc`.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Sweep circuit sizes for the quantum head.
    Grid {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Cells trained concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Score a checkpoint on the test split and print one CSV row.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = BackendKind::Ideal)]
        backend: BackendKind,
        /// Single-qubit depolarizing rate for the noisy backend.
        #[arg(long, default_value_t = NoiseModel::FORTE1.r_1q)]
        r1: f64,
        /// Two-qubit depolarizing rate for the noisy backend.
        #[arg(long, default_value_t = NoiseModel::FORTE1.r_2q)]
        r2: f64,
    },
    /// Print the ansatz as JSON.
    DescribeCircuit {
        #[arg(long, default_value_t = 6)]
        qubits: usize,
        #[arg(long, default_value_t = 4)]
        reps: usize,
    },
    /// Aggregate result files into a CSV and a text table.
    Report {
        #[arg(long)]
        results: PathBuf,
        /// CSV destination; defaults to `<results>/report.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn log(msg: &str) {
    eprintln!("[qtl] {msg}");
}

fn resolve_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    log(&format!("resolved config: {}", serde_json::to_string(&cfg)?));
    Ok(cfg)
}

fn load_data(cfg: &RunConfig) -> Result<Vec<ImageSample>> {
    match &cfg.data {
        DataSource::Manifest(p) => load_dataset(p),
        DataSource::Synth(s) => synth_generate(s, None),
    }
}

/// Train and test image sets for the configured seed.
fn split_data(cfg: &RunConfig) -> Result<(Examples, Examples)> {
    let data = load_data(cfg)?;
    let s = split(&data, cfg.seed, TEST_FRACTION)?;
    let all = Examples::from_images(&data)?;
    log(&format!("{} train / {} test images", s.train.len(), s.test.len()));
    Ok((all.subset(&s.train), all.subset(&s.test)))
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.resolve_output_dir()?;
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn train_logged(model: &mut dyn Trainable, data: &Examples, tc: &TrainConfig, what: &str) -> Result<TrainReport> {
    train_with_progress(model, data, tc, &Backend::Ideal, &mut |e, l, lr| {
        log(&format!("{what} epoch {e}: loss {l:.6} lr {lr:e}"))
    })
}

/// Ideal metrics, plus noisy metrics when the configured backend is noisy.
fn score(
    model: &dyn Trainable,
    test: &Examples,
    backend: &Backend,
    label: &str,
) -> Result<(MetricsReport, Option<MetricsReport>)> {
    let ideal = evaluate(model, test, &Backend::Ideal, label)?;
    let noisy = match backend {
        Backend::Ideal => None,
        b => Some(evaluate(model, test, b, label)?),
    };
    Ok((ideal, noisy))
}

fn save_result(
    dir: &Path,
    name: &str,
    tag: RunTag,
    scores: (MetricsReport, Option<MetricsReport>),
    curve: TrainReport,
) -> Result<()> {
    let (metrics, noisy_metrics) = scores;
    log(&format!("{} test accuracy {:.4}", tag.label(), metrics.accuracy));
    ResultRecord {
        config: tag,
        metrics,
        noisy_metrics,
        final_train_loss: curve.final_loss(),
        loss_curve: curve.loss_curve,
        completed: true,
    }
    .save(&dir.join(format!("result_{name}.json")))
}

fn load_baseline(path: Option<&PathBuf>, dir: &Path) -> Result<crate::models::BaselineCnn> {
    let p = path.cloned().unwrap_or_else(|| dir.join("baseline.qtlc"));
    match Model::load(&p)? {
        Model::Baseline(b) => Ok(b),
        other => Err(Error::Validation(format!(
            "{} holds a {} model, expected a baseline",
            p.display(),
            other.label()
        ))),
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth {
            patients,
            per_patient,
            seed,
            signal,
            out,
        } => {
            let cfg = SynthConfig {
                n_patients: patients,
                images_per_patient: per_patient,
                seed,
                signal_strength: signal,
            };
            let samples = synth_generate(&cfg, Some(&out))?;
            log(&format!(
                "wrote {} images and manifest.csv to {}",
                samples.len(),
                out.display()
            ));
            Ok(())
        }
        Command::TrainBaseline { cfg } => {
            let cfg = resolve_config(&cfg)?;
            let dir = output_dir(&cfg)?;
            let (train, test) = split_data(&cfg)?;
            let (seed, _, _) = model_seeds(cfg.seed);
            let mut model = build_baseline(seed)?;
            let tc = TrainConfig {
                seed,
                ..cfg.baseline_train()
            };
            let curve = train_logged(&mut model, &train, &tc, "baseline")?;
            let scores = score(&model, &test, &Backend::Ideal, "baseline")?;
            Model::Baseline(model.clone()).save(&dir.join("baseline.qtlc"))?;
            let tag = RunTag {
                model: "baseline".into(),
                n_qubits: None,
                reps: None,
                seed,
                backend: Backend::Ideal,
            };
            save_result(&dir, "baseline", tag, scores, curve)
        }
        Command::Finetune { cfg, mode, baseline } => {
            let cfg = resolve_config(&cfg)?;
            let dir = output_dir(&cfg)?;
            let frozen = Arc::new(load_baseline(baseline.as_ref(), &dir)?.freeze()?);
            let (train, test) = split_data(&cfg)?;
            let train_f = train.to_features(&frozen)?;
            let test_f = test.to_features(&frozen)?;
            let (_, ctl_seed, qtl_seed) = model_seeds(cfg.seed);
            match mode {
                HeadMode::Ctl => {
                    let mut head = CtlHead::new(ctl_seed)?;
                    let tc = TrainConfig {
                        seed: ctl_seed,
                        ..cfg.train.clone()
                    };
                    let curve = train_logged(&mut head, &train_f, &tc, "ctl")?;
                    let scores = score(&head, &test_f, &cfg.backend, "ctl")?;
                    Model::Ctl(TransferModel { features: frozen, head }).save(&dir.join("ctl.qtlc"))?;
                    let tag = RunTag {
                        model: "ctl".into(),
                        n_qubits: None,
                        reps: None,
                        seed: ctl_seed,
                        backend: cfg.backend,
                    };
                    save_result(&dir, "ctl", tag, scores, curve)
                }
                HeadMode::Qtl => {
                    let (n, reps) = match cfg.model {
                        ModelSpec::Qtl { n_qubits, reps } => (n_qubits, reps),
                        _ => (6, 4),
                    };
                    let mut head = DressedQuantumNet::new(frozen.output_dim(), n, reps, qtl_seed)?;
                    let tc = TrainConfig {
                        seed: qtl_seed,
                        ..cfg.train.clone()
                    };
                    let curve = train_logged(&mut head, &train_f, &tc, "qtl")?;
                    let tag = RunTag {
                        model: "qtl".into(),
                        n_qubits: Some(n),
                        reps: Some(reps),
                        seed: qtl_seed,
                        backend: cfg.backend,
                    };
                    let scores = score(&head, &test_f, &cfg.backend, &tag.label())?;
                    Model::Qtl(TransferModel { features: frozen, head }).save(&dir.join("qtl.qtlc"))?;
                    save_result(&dir, "qtl", tag, scores, curve)
                }
            }
        }
        Command::Grid { cfg, baseline, jobs } => {
            let cfg = resolve_config(&cfg)?;
            let dir = output_dir(&cfg)?;
            let (train, test) = split_data(&cfg)?;
            let base = match &baseline {
                Some(p) => load_baseline(Some(p), &dir)?,
                None if dir.join("baseline.qtlc").exists() => load_baseline(None, &dir)?,
                None => {
                    let (seed, _, _) = model_seeds(cfg.seed);
                    let mut model = build_baseline(seed)?;
                    let tc = TrainConfig {
                        seed,
                        ..cfg.baseline_train()
                    };
                    train_logged(&mut model, &train, &tc, "baseline")?;
                    model
                }
            };
            let frozen = base.freeze()?;
            let train_f = train.to_features(&frozen)?;
            let test_f = test.to_features(&frozen)?;
            let opts = GridOptions {
                out_dir: Some(dir.join("grid")),
                jobs,
                model_seed: cfg.seed,
                limit: None,
            };
            let outcome = grid_search(
                &train_f,
                &test_f,
                &cfg.grid,
                &cfg.train,
                cfg.backend.noise_model(),
                &opts,
            )?;
            for r in &outcome.results {
                log(&format!(
                    "{}: accuracy {:.4} ({:.1}s)",
                    r.record.config.label(),
                    r.record.metrics.accuracy,
                    r.wall_clock_seconds
                ));
            }
            if let Some((n, reps)) = outcome.best {
                log(&format!("best configuration: {n} qubits, {reps} repetitions"));
            }
            Ok(())
        }
        Command::Evaluate {
            cfg,
            checkpoint,
            backend,
            r1,
            r2,
        } => {
            let cfg = resolve_config(&cfg)?;
            let model = Model::load(&checkpoint)?;
            let backend = match backend {
                BackendKind::Ideal => Backend::Ideal,
                BackendKind::Noisy => Backend::noisy(NoiseModel::new(r1, r2)?),
            };
            let (_, test) = split_data(&cfg)?;
            let m = evaluate(model.as_trainable(), &test, &backend, model.label())?;
            let cells = report::table(std::slice::from_ref(&m))?;
            let csv = report::to_csv(&cells)?;
            print!("{}", csv.lines().nth(1).map(|l| format!("{l}\n")).unwrap_or_default());
            Ok(())
        }
        Command::DescribeCircuit { qubits, reps } => {
            let c = build_ansatz(qubits, reps).map_err(|e| Error::Config(e.to_string()))?;
            log(&format!("{} gates, {} parameters", c.gates().len(), c.n_params()));
            println!("{}", c.to_json_pretty());
            Ok(())
        }
        Command::Report { results, out } => {
            let found = report::collect_results(&results)?;
            let records: Vec<ResultRecord> = found.into_iter().map(|(_, r)| r).collect();
            let cells = report::table(&report::rows_of(&records))?;
            let csv_path = out.unwrap_or_else(|| results.join("report.csv"));
            crate::pipeline::write_atomic(&csv_path, report::to_csv(&cells)?.as_bytes())?;
            print!("{}", report::to_text(&cells));
            log(&format!("wrote {}", csv_path.display()));
            Ok(())
        }
    }
}
