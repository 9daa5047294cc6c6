//! Command-line arguments and the optional TOML experiment file.
//!
//! Every setting can come from either source; flags win.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use uncoupled_match::generate::{Cardinalization, MarketGenSpec};
use uncoupled_match::{fixtures, Market, RuleParams};

#[derive(Debug, Parser)]
#[command(name = "umatch", version, about = "Uncoupled learning in two-sided matching markets")]
pub struct Cli {
    /// TOML experiment file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for batch work (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Proposer-optimal stable match and a stability report.
    Gs(Common),
    /// Monte Carlo runs of the learning dynamics.
    Simulate(SimulateArgs),
    /// Exact stationary analysis over an epsilon sweep.
    Chain(ChainArgs),
    /// Log-log resistance fits for elementary transitions.
    Resistance(ResistanceArgs),
    /// Write a seeded random market as JSON.
    GenMarket(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Market JSON file, or a fixture name: m2, m2b, mal.
    #[arg(long)]
    pub market: Option<String>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct RuleArgs {
    /// Experimentation rate; repeat for several values.
    #[arg(long = "epsilon")]
    pub epsilon: Vec<f64>,
    /// Failed content experiments keep the old baseline utility.
    #[arg(long)]
    pub dd3_revert_keeps_baseline: bool,
    /// Let content proposers "experiment" with their baseline acceptor.
    #[arg(long)]
    pub no_dd2_exclude_baseline: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub rule: RuleArgs,
    /// Horizon T.
    #[arg(long)]
    pub steps: Option<u64>,
    /// Seed; repeat for several runs.
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    /// Fraction of the horizon, from the end, used for metrics.
    #[arg(long)]
    pub window: Option<f64>,
    /// Write one full trace CSV per run into this directory.
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub rule: RuleArgs,
    /// Write transition triplets, the state legend and pi per epsilon here.
    #[arg(long)]
    pub export_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SolverChoice::Auto)]
    pub solver: SolverChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverChoice {
    Auto,
    Direct,
    Power,
}

#[derive(Debug, Args)]
pub struct ResistanceArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub rule: RuleArgs,
    /// Allowed |slope - theory|.
    #[arg(long, default_value_t = 0.1)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of proposers.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of acceptors.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// rank: random strict orders written as lists; uniform: random values.
    #[arg(long, value_enum)]
    pub mode: Option<ModeChoice>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeChoice {
    Rank,
    Uniform,
}

impl From<ModeChoice> for Cardinalization {
    fn from(m: ModeChoice) -> Self {
        match m {
            ModeChoice::Rank => Cardinalization::Rank,
            ModeChoice::Uniform => Cardinalization::Uniform,
        }
    }
}

/// Contents of `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub market: Option<String>,
    pub generate: Option<MarketGenSpec>,
    pub epsilon: Option<Vec<f64>>,
    pub steps: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub window: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub trace_dir: Option<PathBuf>,
    pub export_dir: Option<PathBuf>,
    pub dd3_revert_keeps_baseline: Option<bool>,
    pub dd2_exclude_baseline: Option<bool>,
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn market(&self, flag: Option<&str>) -> Result<Market> {
        if let Some(name) = flag.or(self.market.as_deref()) {
            return load_market(name);
        }
        match &self.generate {
            Some(spec) => spec.generate().context("generating market"),
            None => bail!("no market given: pass --market <file|m2|m2b|mal> or set `market` in the config"),
        }
    }

    pub fn out(&self, flag: &Option<PathBuf>) -> Option<PathBuf> {
        flag.clone().or_else(|| self.out.clone())
    }

    pub fn format(&self, flag: Option<Format>) -> Format {
        flag.or(self.format).unwrap_or(Format::Csv)
    }

    /// Validated rule parameters, one per epsilon.
    pub fn rules(&self, args: &RuleArgs, default_eps: &[f64]) -> Result<Vec<RuleParams>> {
        let eps: Vec<f64> = if !args.epsilon.is_empty() {
            args.epsilon.clone()
        } else {
            self.epsilon.clone().unwrap_or_else(|| default_eps.to_vec())
        };
        if eps.is_empty() {
            bail!("epsilon list is empty");
        }
        let keep = args.dd3_revert_keeps_baseline || self.dd3_revert_keeps_baseline.unwrap_or(false);
        let exclude = !args.no_dd2_exclude_baseline && self.dd2_exclude_baseline.unwrap_or(true);
        eps.iter()
            .map(|&e| {
                Ok(RuleParams::new(e)
                    .with_context(|| format!("epsilon {e}"))?
                    .with_revert_keeps_baseline_utility(keep)
                    .with_exclude_baseline_from_experiments(exclude))
            })
            .collect()
    }
}

/// A fixture name or a path to a market JSON file. An existing file of
/// the same name takes precedence over the fixture.
pub fn load_market(name: &str) -> Result<Market> {
    let path = Path::new(name);
    if !path.exists() {
        if let Some(m) = fixtures::by_name(name) {
            return Ok(m);
        }
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading market {name}"))?;
    Market::from_json_str(&text).with_context(|| format!("parsing market {name}"))
}
