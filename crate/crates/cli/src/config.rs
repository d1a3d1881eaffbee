//! Experiment configuration: command-line flags, optionally overridden by a
//! JSON file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Exact statistics of a known source.
    Oracle,
    /// Snapshots drawn from a source or read from files.
    Sampled,
}

/// Every field is optional so that a config file can override any subset.
#[derive(Clone, Debug, Default, Serialize, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Domain size (generate).
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of constituents.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of 1-snapshots.
    #[arg(long)]
    pub samples1: Option<usize>,
    /// Number of 2-snapshots.
    #[arg(long)]
    pub samples2: Option<usize>,
    /// Number of (2k-1)-snapshots.
    #[arg(long = "samples-hi")]
    #[serde(rename = "samples_hi")]
    pub samples_hi: Option<usize>,
    /// Width parameter; defaults to the measured width of the model.
    #[arg(long)]
    pub zeta: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Split granularity for isotropization.
    #[arg(long)]
    pub varsigma: Option<f64>,
    /// Lower bound on the mixture weights.
    #[arg(long = "w-min")]
    #[serde(rename = "w_min")]
    pub w_min: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Overrides the spike matching tolerance.
    #[arg(long = "match-tol")]
    #[serde(rename = "match_tol")]
    pub match_tol: Option<f64>,
    /// Run the isotropization reduction before learning (sampled mode).
    #[arg(long)]
    pub isotropize: Option<bool>,
    /// Result JSON path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Fields set in `file` replace those given on the command line.
    pub fn overridden_by(self, file: ExperimentConfig) -> Self {
        Self {
            n: file.n.or(self.n),
            k: file.k.or(self.k),
            seed: file.seed.or(self.seed),
            samples1: file.samples1.or(self.samples1),
            samples2: file.samples2.or(self.samples2),
            samples_hi: file.samples_hi.or(self.samples_hi),
            zeta: file.zeta.or(self.zeta),
            omega: file.omega.or(self.omega),
            delta: file.delta.or(self.delta),
            varsigma: file.varsigma.or(self.varsigma),
            w_min: file.w_min.or(self.w_min),
            mode: file.mode.or(self.mode),
            match_tol: file.match_tol.or(self.match_tol),
            isotropize: file.isotropize.or(self.isotropize),
            out: file.out.or(self.out),
        }
    }

    pub fn resolve(self, path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(self) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let file: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(self.overridden_by(file))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn mode(&self) -> Mode {
        self.mode.unwrap_or(Mode::Sampled)
    }

    pub fn omega(&self) -> f64 {
        self.omega.unwrap_or(2.0)
    }

    /// Oracle runs use a tiny delta since the direction program's slack
    /// is the only error source there.
    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(match self.mode() {
            Mode::Oracle => 1e-10,
            Mode::Sampled => 1e-4,
        })
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.samples1.unwrap_or(1_000_000), self.samples2.unwrap_or(1_000_000), self.samples_hi.unwrap_or(1_000_000))
    }
}
