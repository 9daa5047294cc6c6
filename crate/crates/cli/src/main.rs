mod commands;
mod config;

use std::process::ExitCode;

use anyhow::Result;
use clap::error::ErrorKind;
use clap::Parser;
use uncoupled_match::chain::ChainError;
use uncoupled_match::MarketError;

use config::{Cli, Command, ExperimentConfig};

/// 2 for analysis failures (guards, non-convergence), 1 for everything
/// else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let analysis = err.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<ChainError>(),
            Some(ChainError::TooLarge { .. } | ChainError::NotConverged { .. } | ChainError::Reducible(_))
        ) || matches!(
            cause.downcast_ref::<MarketError>(),
            Some(MarketError::TooLarge { .. } | MarketError::NoConvergence(_))
        )
    });
    if analysis {
        2
    } else {
        1
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = ExperimentConfig::load(cli.config.as_deref())?;
    if let Some(jobs) = cli.jobs.or(cfg.jobs) {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match &cli.command {
        Command::Gs(args) => commands::gs(&cfg, args),
        Command::Simulate(args) => commands::simulate(&cfg, args),
        Command::Chain(args) => commands::chain(&cfg, args),
        Command::Resistance(args) => commands::resistance(&cfg, args),
        Command::GenMarket(args) => commands::gen_market(&cfg, args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
