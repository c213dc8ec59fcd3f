//! `genattr`: train generators, make probes, attribute them, and run the
//! MNIST experiments.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use genattr::eval::{ExperimentKind, Preset};
use genattr::ErrorClass;

use crate::config::CliConfig;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] genattr::Error),
    #[error(transparent)]
    Render(#[from] genattr_render::RenderError),
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use genattr_render::RenderError;
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e.class() {
                ErrorClass::Usage => EXIT_USAGE,
                ErrorClass::Data => EXIT_DATA,
                ErrorClass::Numeric => EXIT_NUMERIC,
            },
            CliError::Render(RenderError::Empty(_) | RenderError::Invalid(_)) => EXIT_USAGE,
            CliError::Render(_) | CliError::Image { .. } | CliError::Io(_) => EXIT_DATA,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "genattr", version, about = "Attribute synthetic images to the generator that made them")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; they override the config file and
/// the `GENATTR_*` environment.
#[derive(Debug, Args)]
struct Overrides {
    /// TOML config file (unknown keys are rejected).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse_preset)]
    preset: Option<Preset>,
    /// Worker threads (0: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// JPEG qualities, comma separated.
    #[arg(long, global = true, value_delimiter = ',', value_name = "Q1,Q2,...")]
    quality: Option<Vec<u8>>,
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Directory with the MNIST IDX files.
    #[arg(long, global = true, value_name = "DIR")]
    data_dir: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Probes per generator.
    #[arg(long, global = true)]
    probes: Option<usize>,
    #[arg(long, global = true)]
    train_steps: Option<usize>,
    #[arg(long, global = true)]
    restarts: Option<usize>,
    #[arg(long, global = true)]
    inversion_steps: Option<usize>,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: genattr::Error| e.to_string())
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    s.parse().map_err(|e: genattr::Error| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the generator pair of one experiment trial.
    Train {
        #[arg(value_parser = parse_kind)]
        kind: ExperimentKind,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Emit probe images from a generator, with their latents in a sidecar.
    Generate {
        generator: PathBuf,
        /// Number of probes (default: the preset's probes per generator).
        #[arg(long)]
        count: Option<usize>,
        /// Reuse the latents recorded in an earlier sidecar.
        #[arg(long, value_name = "SIDECAR")]
        from_sidecar: Option<PathBuf>,
    },
    /// Attribute probe images among candidate generators.
    Attribute {
        /// Probe images (PNG or JPEG).
        #[arg(required = true, value_name = "PROBE")]
        images: Vec<PathBuf>,
        /// Candidate generator file; give at least two.
        #[arg(short, long = "generator", required = true)]
        generators: Vec<PathBuf>,
    },
    /// Run an experiment end to end.
    Experiment {
        #[arg(value_parser = parse_kind, required_unless_present = "rerun")]
        kind: Option<ExperimentKind>,
        /// Repeat the run recorded in a manifest instead.
        #[arg(long, value_name = "MANIFEST")]
        rerun: Option<PathBuf>,
    },
    /// Render ROC curves, histograms and probe grids to PNG.
    Plot {
        /// Curve (`roc*.tsv`), histogram (`hist*.tsv`) or example directories.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        title: Option<String>,
    },
}

impl Overrides {
    fn config(&self) -> Result<CliConfig, CliError> {
        let file = match &self.config {
            Some(p) => CliConfig::load(p)?,
            None => CliConfig::default(),
        };
        let env = CliConfig::from_env(std::env::vars())?;
        let flags = CliConfig {
            data_dir: self.data_dir.clone(),
            out: self.out.clone(),
            cache_dir: self.cache_dir.clone(),
            preset: self.preset,
            seed: self.seed,
            jobs: self.jobs,
            trials: self.trials,
            probes: self.probes,
            qualities: self.quality.clone(),
            train_steps: self.train_steps,
            restarts: self.restarts,
            inversion_steps: self.inversion_steps,
            ..Default::default()
        };
        Ok(file.merge(env).merge(flags))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = cli.overrides.config()?;
    if let Some(jobs) = cfg.jobs.filter(|&j| j > 0) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;
    }
    match cli.command {
        Command::Train { kind, trial } => commands::train(&cfg, kind, trial),
        Command::Generate { generator, count, from_sidecar } => {
            commands::generate(&cfg, &generator, count, from_sidecar.as_deref())
        }
        Command::Attribute { images, generators } => commands::attribute(&cfg, &images, &generators),
        Command::Experiment { kind, rerun } => commands::experiment(&cfg, kind, rerun.as_deref()),
        Command::Plot { inputs, title } => plot::plot(&cfg.out(), &inputs, title.as_deref()).map(|written| {
            for p in written {
                println!("{}", p.display());
            }
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
