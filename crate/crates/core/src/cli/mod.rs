//! The `shadowgen` command-line interface.
//!
//! Seven subcommands cover the pipeline:
//!
//! - `gen-data` — simulate an experiment config into measurement datasets.
//! - `train` — fit a generative model on dataset files (resumable).
//! - `sample` — draw artificial measurements from a trained model.
//! - `estimate` — shadow-estimate properties from a dataset.
//! - `phase-diagram` — order parameters and labels over a sweep, from
//!   datasets, a model, exact simulation, or the frozen-horizon baseline.
//! - `evaluate` — compare two estimate or phase tables.
//! - `grad-check` — finite-difference audit of the model gradients.
//!
//! Everything is deterministic given `--seed`: data generation, training,
//! and sampling all derive per-purpose streams from the one base seed. Exit
//! codes: 0 on success, 2 for configuration/usage errors, 3 for numerical
//! failures.

pub mod config;
pub mod pipeline;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::measure::{derive_seed, Dataset};
use crate::model::{GenerativeModel, Trainer};
use crate::phases::phase_csv;
use config::{ExperimentConfig, SampleConfig};
use pipeline::{PropertySelection, STREAM_TRAIN};

/// Generative models of quantum measurement data: simulate, train, sample,
/// estimate.
#[derive(Debug, Parser)]
#[command(name = "shadowgen", version, about)]
pub struct Cli {
    /// Base RNG seed, overriding the seed in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Force bit-reproducible execution. This build is always deterministic
    /// (single-threaded, explicitly seeded), so the flag asserts rather than
    /// changes behavior.
    #[arg(long, global = true)]
    pub deterministic: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the systems an experiment config describes and write
    /// measurement datasets (train/test splits) plus a systems manifest.
    GenData {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for `<split>.qd` files and `systems.csv`.
        #[arg(long)]
        out: PathBuf,
    },

    /// Train a generative model on one or more dataset files.
    Train {
        /// Dataset files; multiple files train one model across sizes.
        #[arg(required = true)]
        data: Vec<PathBuf>,
        /// Experiment config (TOML). Not needed when resuming.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Where to write the trained model.
        #[arg(long)]
        out: PathBuf,
        /// Trainer checkpoint: saved after every epoch, resumed from when
        /// the file already exists.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },

    /// Draw artificial measurement records from a trained model.
    Sample {
        /// Trained model file (from `train`).
        #[arg(long)]
        checkpoint: PathBuf,
        /// Conditions config (TOML with [[conditions]] system descriptors).
        #[arg(long)]
        config: PathBuf,
        /// Records per condition.
        #[arg(long, default_value_t = 1000)]
        shots: usize,
        /// Output directory for the sampled dataset files.
        #[arg(long)]
        out: PathBuf,
    },

    /// Shadow-estimate properties of every system in a dataset, as CSV.
    Estimate {
        /// Dataset file (Pauli-6 basis).
        data: PathBuf,
        /// Comma-separated: correlations, entropies, all. Default all.
        #[arg(long)]
        properties: Option<String>,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Order parameters and phase labels over a parameter sweep.
    PhaseDiagram {
        /// Dataset file (sources `dataset` and `baseline-t0`).
        data: Option<PathBuf>,
        /// Where the measurement records come from.
        #[arg(long, value_enum, default_value_t = PhaseSource::Dataset)]
        source: PhaseSource,
        /// Experiment config defining the sweep grid (sources `model` and
        /// `exact`).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trained model file (source `model`).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Records per sweep point (source `model`).
        #[arg(long, default_value_t = 1000)]
        shots: usize,
        /// Horizon time for source `baseline-t0`: points with `time >= t0`
        /// are predicted from the records measured at `t0`.
        #[arg(long, default_value_t = 1.0)]
        t0: f64,
        /// Output file (stdout when omitted; required for PNG).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output format.
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
    },

    /// Compare a predicted CSV against a reference CSV of the same schema
    /// (estimate tables or phase tables) and report error statistics.
    Evaluate {
        /// Predicted table.
        pred: PathBuf,
        /// Reference table.
        truth: PathBuf,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Check analytic model gradients against finite differences.
    GradCheck {
        /// Largest relative error allowed.
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

/// Provenance of the records behind a phase diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhaseSource {
    /// Measured records in a dataset file.
    Dataset,
    /// Records sampled from a trained model over the config's sweep grid.
    Model,
    /// Exact simulation of every sweep point.
    Exact,
    /// Frozen-horizon baseline: reuse the `t0` measurements for all later
    /// times.
    BaselineT0,
}

/// `--format` choices for phase diagrams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Png,
}

/// Parse `std::env::args` and run; returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Run a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { config, out } => cmd_gen_data(&config, &out, cli.seed),
        Command::Train {
            data,
            config,
            out,
            checkpoint,
        } => cmd_train(&data, config.as_deref(), &out, checkpoint.as_deref(), cli.seed),
        Command::Sample {
            checkpoint,
            config,
            shots,
            out,
        } => cmd_sample(&checkpoint, &config, shots, &out, cli.seed),
        Command::Estimate {
            data,
            properties,
            out,
        } => cmd_estimate(&data, properties.as_deref(), out.as_deref()),
        Command::PhaseDiagram {
            data,
            source,
            config,
            checkpoint,
            shots,
            t0,
            out,
            format,
        } => cmd_phase_diagram(
            data.as_deref(),
            source,
            config.as_deref(),
            checkpoint.as_deref(),
            shots,
            t0,
            out.as_deref(),
            format,
            cli.seed,
        ),
        Command::Evaluate { pred, truth, out } => cmd_evaluate(&pred, &truth, out.as_deref()),
        Command::GradCheck { tolerance } => {
            let report = pipeline::grad_check_report(cli.seed.unwrap_or(0), tolerance)?;
            print!("{report}");
            Ok(())
        }
    }
}

fn write_or_stdout(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_gen_data(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let config = ExperimentConfig::load(config)?;
    let seed = seed.unwrap_or(config.experiment.seed);
    let data = pipeline::gen_data(&config, seed)?;
    let written = pipeline::write_gen_data(&data, out)?;
    for path in &written {
        eprintln!("wrote {path}");
    }
    Ok(())
}

fn cmd_train(
    data: &[PathBuf],
    config: Option<&Path>,
    out: &Path,
    checkpoint: Option<&Path>,
    seed: Option<u64>,
) -> Result<()> {
    let (_, training) = pipeline::load_training_sets(data)?;
    let resume_from = checkpoint.filter(|p| p.exists());
    let mut trainer = match resume_from {
        Some(ck) => {
            if seed.is_some() {
                eprintln!("note: resuming from {}; --seed is ignored", ck.display());
            }
            let trainer = Trainer::resume(ck)?;
            eprintln!(
                "resumed at epoch {}/{}",
                trainer.completed_epochs(),
                trainer.train_config().epochs
            );
            trainer
        }
        None => {
            let config_path = config.ok_or_else(|| {
                Error::Config(
                    "train needs --config (unless --checkpoint names an existing checkpoint to \
                     resume)"
                        .into(),
                )
            })?;
            let config = ExperimentConfig::load(config_path)?;
            let base = seed.unwrap_or(config.experiment.seed);
            let model =
                GenerativeModel::new(config.model_config()?, derive_seed(base, STREAM_TRAIN, 0))?;
            eprintln!(
                "training a {} parameter model on {} records",
                model.n_parameters(),
                training.records.len()
            );
            let mut train_config = config.train;
            if train_config.seed == 0 {
                train_config.seed = derive_seed(base, STREAM_TRAIN, 1);
            }
            Trainer::new(model, &training, train_config)?
        }
    };
    let total = trainer.train_config().epochs;
    match checkpoint {
        Some(ck) => {
            while trainer.completed_epochs() < total {
                trainer.run_epochs(&training, 1)?;
                trainer.save(ck)?;
            }
        }
        None => trainer.run(&training)?,
    }
    trainer.model.save(out)?;
    let last_loss = trainer.epoch_losses().last().copied().unwrap_or(f64::NAN);
    eprintln!(
        "trained {total} epochs (final loss {last_loss:.6}); wrote {}",
        out.display()
    );
    Ok(())
}

fn cmd_sample(
    checkpoint: &Path,
    config: &Path,
    shots: usize,
    out: &Path,
    seed: Option<u64>,
) -> Result<()> {
    let model = GenerativeModel::load(checkpoint)?;
    let sample_config = SampleConfig::load(config)?;
    let seed = seed.unwrap_or(sample_config.seed);
    let files = pipeline::sample_to_datasets(
        &model,
        &sample_config.conditions,
        shots,
        seed,
        &sample_config.label,
    )?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))?;
    for file in &files {
        let path = out.join(format!("{}.qd", file.name));
        file.dataset.write_to(&path)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_estimate(data: &Path, properties: Option<&str>, out: Option<&Path>) -> Result<()> {
    let dataset = Dataset::read_from(data)?;
    let selection = PropertySelection::parse(properties)?;
    let csv = pipeline::estimate_csv(&dataset, selection)?;
    write_or_stdout(&csv, out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_phase_diagram(
    data: Option<&Path>,
    source: PhaseSource,
    config: Option<&Path>,
    checkpoint: Option<&Path>,
    shots: usize,
    t0: f64,
    out: Option<&Path>,
    format: OutputFormat,
    seed: Option<u64>,
) -> Result<()> {
    let need_data = |what: &str| -> Result<Dataset> {
        let path = data.ok_or_else(|| {
            Error::Config(format!("phase-diagram --source {what} needs a dataset argument"))
        })?;
        Dataset::read_from(path)
    };
    let need_config = |what: &str| -> Result<ExperimentConfig> {
        let path = config.ok_or_else(|| {
            Error::Config(format!("phase-diagram --source {what} needs --config"))
        })?;
        ExperimentConfig::load(path)
    };
    let points = match source {
        PhaseSource::Dataset => pipeline::phase_from_dataset(&need_data("dataset")?)?,
        PhaseSource::BaselineT0 => pipeline::phase_baseline_t0(&need_data("baseline-t0")?, t0)?,
        PhaseSource::Model => {
            let config = need_config("model")?;
            let model_path = checkpoint.ok_or_else(|| {
                Error::Config("phase-diagram --source model needs --checkpoint".into())
            })?;
            let model = GenerativeModel::load(model_path)?;
            let grid = config.grid_points()?;
            let seed = seed.unwrap_or(config.experiment.seed);
            pipeline::phase_from_model(&model, &grid, shots, seed)?
        }
        PhaseSource::Exact => pipeline::phase_exact(&need_config("exact")?.grid_points()?)?,
    };
    match format {
        OutputFormat::Csv => write_or_stdout(&phase_csv(&points), out),
        OutputFormat::Png => {
            let path =
                out.ok_or_else(|| Error::Config("--format png needs --out <file>".into()))?;
            report::write_phase_png(&points, path)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn cmd_evaluate(pred: &Path, truth: &Path, out: Option<&Path>) -> Result<()> {
    let read = |p: &Path| -> Result<String> {
        std::fs::read_to_string(p).map_err(|e| Error::io(p.display().to_string(), e))
    };
    let pred_text = read(pred)?;
    let truth_text = read(truth)?;
    let (report, unmatched) = report::evaluate_csv(
        &pred_text,
        &truth_text,
        &pred.display().to_string(),
        &truth.display().to_string(),
    )?;
    if unmatched > 0 {
        eprintln!("note: {unmatched} rows had no partner in the other table and were skipped");
    }
    write_or_stdout(&report, out)
}
