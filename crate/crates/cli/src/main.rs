//! `snapmix` command-line front end.
//!
//! Exit codes: 0 success, 1 spike matching failure, 2 I/O, 3 invalid
//! configuration or input.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "snapmix", version, about = "Learn mixtures of discrete distributions from small snapshots")]
struct Cli {
    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random wide isotropic mixture source as JSON.
    Generate {
        #[command(flatten)]
        cfg: ExperimentConfig,
        /// JSON file whose fields override the flags.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Draw m-snapshots from a model into a CSV file.
    Sample {
        #[arg(long)]
        model: PathBuf,
        /// Aperture of each snapshot.
        #[arg(long)]
        m: usize,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Width and isotropy diagnostics of a model.
    Width {
        #[arg(long)]
        model: PathBuf,
    },
    /// Run the learner and report errors against the model when known.
    Learn(commands::LearnArgs),
    /// Hard pair of spike distributions and snapshot total variations, as CSV.
    Lowerbound {
        #[arg(long)]
        k: usize,
        /// Aperture used for the LP and the TV report.
        #[arg(long)]
        b: usize,
        #[arg(long, default_value_t = 2.0)]
        rho: f64,
        /// Low aperture for the indistinguishability check (default 2k-2).
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Matching(String),
    Io(String),
    Config(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Matching(_) => 1,
            CliError::Io(_) => 2,
            CliError::Config(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Matching(m) => write!(f, "matching failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
        }
    }
}

impl From<snapmix::Error> for CliError {
    fn from(e: snapmix::Error) -> Self {
        use snapmix::Error as E;
        match e {
            E::MatchingFailed { .. } => CliError::Matching(e.to_string()),
            E::Io(_) | E::Json(_) | E::Parse(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let result = match cli.command {
        Command::Generate { cfg, config } => cfg.resolve(config.as_deref()).and_then(commands::generate),
        Command::Sample { model, m, count, seed, out } => commands::sample(&model, m, count, seed, out.as_deref()),
        Command::Width { model } => commands::width(&model),
        Command::Learn(args) => commands::learn(args),
        Command::Lowerbound { k, b, rho, m, out } => commands::lowerbound(k, b, rho, m, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
