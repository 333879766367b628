//! `featsel`: batch front end for synthesis, feature extraction, policy
//! training, selection, evaluation and reporting.

mod config;
mod manifest;
mod stages;
mod summary;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use stages::Ctx;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Compute(#[from] featsel_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::MissingInput(_) => 3,
            CliError::Io { .. } | CliError::Compute(_) => 4,
        }
    }

    pub fn config(e: featsel_core::Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "featsel",
    version,
    about = "Feature selection for adhesion hazard classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (0: one per core). Artifacts do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    /// Artifact root; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize one record per condition and pad count.
    Synth(Common),
    /// Window, normalize and extract features for every benchmark cell.
    Extract(Common),
    /// Train the selection policy of every cell.
    TrainPpo(Common),
    /// Run every configured selector.
    Select(Common),
    /// Score the selections on clean and corrupted test data.
    Evaluate(Common),
    /// Write summary tables, plot-ready CSVs and stability exports.
    Report(Common),
    /// Run the numerical self-tests.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Policy checkpoint to validate.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn context(common: &Common) -> Result<Ctx, CliError> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let jobs = common.jobs.unwrap_or(cfg.jobs);
    // A second initialization only happens in-process (tests); keep the first.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    let root = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ctx::new(cfg, root)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let done = |what: &str, path: PathBuf| eprintln!("{what}: wrote {}", path.display());
    match cli.command {
        Command::Synth(c) => done("synth", stages::synth(&context(&c)?)?),
        Command::Extract(c) => done("extract", stages::extract(&context(&c)?)?),
        Command::TrainPpo(c) => done("train-ppo", stages::train_ppo(&context(&c)?)?),
        Command::Select(c) => done("select", stages::select(&context(&c)?)?),
        Command::Evaluate(c) => done("evaluate", stages::evaluate(&context(&c)?)?),
        Command::Report(c) => {
            let (path, summary) = stages::report(&context(&c)?)?;
            print!("{summary}");
            done("report", path);
        }
        Command::Verify { common, checkpoint } => {
            let checks = stages::verify(&context(&common)?, checkpoint.as_deref())?;
            let mut failed = 0;
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                return Err(CliError::Compute(featsel_core::Error::Domain(format!(
                    "{failed} of {} oracles failed",
                    checks.len()
                ))));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("featsel: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
