use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use uncoupled_match::chain::{
    build_chain, elementary_transitions, posm_mass, resistance_slope, stationary_with, write_legend_json, write_pi_csv,
    write_triplets_csv, ResistanceKind, SlopeFit, Solver,
};
use uncoupled_match::generate::{Cardinalization, MarketGenSpec};
use uncoupled_match::sim::{
    batch_run_configs, median, run_with, write_metrics_csv, write_trace_row, Metrics, SimConfig, TraceVerbosity,
    TRACE_CSV_HEADER,
};
use uncoupled_match::{Market, MarketError, MatchOutcome};

use crate::config::{ChainArgs, Common, ExperimentConfig, Format, GenArgs, ResistanceArgs, SimulateArgs, SolverChoice};

pub const DEFAULT_SWEEP: [f64; 6] = [0.2, 0.1, 0.05, 0.02, 0.005, 0.001];
pub const DEFAULT_GRID: [f64; 4] = [0.1, 0.05, 0.02, 0.01];

pub const CHAIN_CSV_HEADER: &str = "epsilon,posm_mass,top_state,residual";
pub const RESISTANCE_CSV_HEADER: &str = "kind,delta_u,theory,slope,abs_error,pass";

/// Data goes to `out` (or stdout); human summaries go to stdout when the
/// data has its own file and to stderr otherwise.
struct Sink {
    data: Box<dyn Write>,
    to_file: bool,
}

impl Sink {
    fn open(out: Option<PathBuf>) -> Result<Self> {
        Ok(match out {
            Some(path) => Sink {
                data: Box::new(BufWriter::new(
                    File::create(&path).with_context(|| format!("creating {}", path.display()))?,
                )),
                to_file: true,
            },
            None => Sink {
                data: Box::new(BufWriter::new(io::stdout())),
                to_file: false,
            },
        })
    }

    fn summary(&self, line: &str) {
        if self.to_file {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }

    fn json<T: Serialize>(&mut self, value: &T) -> Result<()> {
        serde_json::to_writer_pretty(&mut self.data, value)?;
        writeln!(self.data)?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.data.flush()?;
        Ok(())
    }
}

fn pairs(market: &Market, mu: &MatchOutcome) -> Vec<(String, String)> {
    mu.pairs()
        .map(|(i, j)| (market.proposer_name(i).to_string(), market.acceptor_name(j).to_string()))
        .collect()
}

#[derive(Serialize)]
struct GsReport {
    posm: Vec<(String, String)>,
    stable: bool,
    optimal: Option<bool>,
    stable_matches: Option<usize>,
}

pub fn gs(cfg: &ExperimentConfig, args: &Common) -> Result<()> {
    let market = cfg.market(args.market.as_deref())?;
    let posm = market.gale_shapley();
    let stable = market.is_stable(&posm);
    let (optimal, count) = match market.enumerate_stable_matches() {
        Ok(all) => (
            Some(all.iter().all(|mu| market.proposer_weakly_prefers(&posm, mu))),
            Some(all.len()),
        ),
        Err(e @ MarketError::TooLarge { .. }) => {
            eprintln!("warning: optimality not checked: {e}");
            (None, None)
        }
        Err(e) => return Err(e.into()),
    };
    let mut sink = Sink::open(cfg.out(&args.out))?;
    match cfg.format(args.format) {
        Format::Json => sink.json(&GsReport {
            posm: pairs(&market, &posm),
            stable,
            optimal,
            stable_matches: count,
        })?,
        Format::Csv => {
            let opt = match (optimal, count) {
                (Some(o), Some(1)) => format!("{o} (1 stable match)"),
                (Some(o), Some(c)) => format!("{o} ({c} stable matches)"),
                _ => "unchecked".to_string(),
            };
            writeln!(
                sink.data,
                "{}; stable: {stable}; optimal: {opt}",
                market.describe_match(&posm)
            )?;
        }
    }
    sink.finish()
}

pub fn simulate(cfg: &ExperimentConfig, args: &SimulateArgs) -> Result<()> {
    let market = cfg.market(args.common.market.as_deref())?;
    let rules = cfg.rules(&args.rule, &[0.05])?;
    let horizon = args.steps.or(cfg.steps).unwrap_or(100_000);
    let seeds = if args.seeds.is_empty() {
        cfg.seeds.clone().unwrap_or_else(|| vec![0])
    } else {
        args.seeds.clone()
    };
    if seeds.is_empty() {
        bail!("seed list is empty");
    }
    let window = args.window.or(cfg.window).unwrap_or(0.5);
    let configs: Vec<SimConfig> = rules
        .iter()
        .flat_map(|&rule| {
            seeds.iter().map(move |&seed| SimConfig {
                window,
                ..SimConfig::new(rule, horizon, seed)
            })
        })
        .collect();
    for c in &configs {
        c.validate().context("invalid simulation config")?;
    }

    let metrics: Vec<Metrics> = match args.trace_dir.clone().or_else(|| cfg.trace_dir.clone()) {
        Some(dir) => {
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            configs
                .par_iter()
                .map(|c| traced_run(&market, c, &dir))
                .collect::<Result<_>>()?
        }
        None => batch_run_configs(&market, &configs)?,
    };

    let mut sink = Sink::open(cfg.out(&args.common.out))?;
    match cfg.format(args.common.format) {
        Format::Csv => write_metrics_csv(&market, &metrics, &mut sink.data)?,
        Format::Json => sink.json(&metrics)?,
    }
    for rule in &rules {
        let freqs: Vec<f64> = metrics
            .iter()
            .filter(|m| m.epsilon == rule.epsilon())
            .map(|m| m.posm_frequency)
            .collect();
        sink.summary(&format!(
            "epsilon {}: median posm_frequency {:.4} over {} seed(s)",
            rule.epsilon(),
            median(&freqs).unwrap_or(0.0),
            freqs.len()
        ));
    }
    sink.finish()
}

fn traced_run(market: &Market, config: &SimConfig, dir: &Path) -> Result<Metrics> {
    let path = dir.join(format!("trace_eps{}_seed{}.csv", config.rule.epsilon(), config.seed));
    let mut out = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    let mut failure = None;
    let config = SimConfig {
        verbosity: TraceVerbosity::Summary,
        ..*config
    };
    let trace = run_with(market, &config, |t, rec| {
        if failure.is_none() {
            failure = write_trace_row(market, t, rec, &mut out).err();
        }
    })?;
    if let Some(e) = failure {
        return Err(e).with_context(|| format!("writing {}", path.display()));
    }
    out.flush()?;
    Ok(trace.metrics)
}

#[derive(Serialize)]
struct ChainRow {
    epsilon: f64,
    posm_mass: f64,
    top_state: String,
    residual: f64,
}

pub fn chain(cfg: &ExperimentConfig, args: &ChainArgs) -> Result<()> {
    let market = cfg.market(args.common.market.as_deref())?;
    let rules = cfg.rules(&args.rule, &DEFAULT_SWEEP)?;
    let solver = match args.solver {
        SolverChoice::Auto => Solver::Auto,
        SolverChoice::Direct => Solver::Direct,
        SolverChoice::Power => Solver::DEFAULT_POWER,
    };
    let export = args.export_dir.clone().or_else(|| cfg.export_dir.clone());
    if let Some(dir) = &export {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let what = format!("exact analysis of a {}x{} market", market.n(), market.m());
    let rows: Vec<ChainRow> = rules
        .par_iter()
        .map(|params| {
            let chain = build_chain(&market, params).with_context(|| what.clone())?;
            let st = stationary_with(&chain, solver).with_context(|| format!("epsilon {}", params.epsilon()))?;
            if let Some(dir) = &export {
                let eps = params.epsilon();
                write_triplets_csv(&chain, create(&dir.join(format!("triplets_eps{eps}.csv")))?)?;
                write_pi_csv(&st.pi, create(&dir.join(format!("pi_eps{eps}.csv")))?)?;
                write_legend_json(&chain, create(&dir.join("legend.json"))?)?;
            }
            Ok(ChainRow {
                epsilon: params.epsilon(),
                posm_mass: posm_mass(&chain, &st.pi),
                top_state: chain.state(st.argmax()).describe(&market),
                residual: st.residual,
            })
        })
        .collect::<Result<_>>()?;

    let mut sink = Sink::open(cfg.out(&args.common.out))?;
    match cfg.format(args.common.format) {
        Format::Csv => {
            writeln!(sink.data, "{CHAIN_CSV_HEADER}")?;
            for r in &rows {
                writeln!(
                    sink.data,
                    "{},{},\"{}\",{:e}",
                    r.epsilon, r.posm_mass, r.top_state, r.residual
                )?;
            }
        }
        Format::Json => sink.json(&rows)?,
    }
    let mut by_eps: Vec<&ChainRow> = rows.iter().collect();
    by_eps.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    let monotone = by_eps.windows(2).all(|w| w[1].posm_mass >= w[0].posm_mass - 1e-9);
    sink.summary(&format!("posm_mass nondecreasing as epsilon decreases: {monotone}"));
    sink.finish()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

#[derive(Serialize)]
struct ResistanceRow {
    #[serde(flatten)]
    fit: SlopeFit,
    pass: bool,
}

pub fn resistance(cfg: &ExperimentConfig, args: &ResistanceArgs) -> Result<()> {
    let market = cfg.market(args.common.market.as_deref())?;
    let rules = cfg.rules(&args.rule, &DEFAULT_GRID)?;
    let grid: Vec<f64> = rules.iter().map(|r| r.epsilon()).collect();
    let params = rules[0];
    let transitions = elementary_transitions(&market, &params)?;
    let rows: Vec<ResistanceRow> = transitions
        .par_iter()
        .map(|t| {
            let fit = resistance_slope(&market, &params, t, &grid)?;
            let pass = fit.passed(args.tolerance);
            Ok(ResistanceRow { fit, pass })
        })
        .collect::<Result<_>>()?;

    let mut sink = Sink::open(cfg.out(&args.common.out))?;
    match cfg.format(args.common.format) {
        Format::Csv => {
            writeln!(sink.data, "{RESISTANCE_CSV_HEADER}")?;
            for r in &rows {
                let f = &r.fit;
                writeln!(
                    sink.data,
                    "{},{},{},{:.4},{:.4},{}",
                    f.kind.name(),
                    f.argument,
                    f.theory,
                    f.slope,
                    f.abs_error,
                    r.pass
                )?;
            }
        }
        Format::Json => sink.json(&rows)?,
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    let extreme = |k: ResistanceKind, max: bool| {
        let it = rows.iter().filter(|r| r.fit.kind == k).map(|r| r.fit.slope);
        if max {
            it.fold(f64::NEG_INFINITY, f64::max)
        } else {
            it.fold(f64::INFINITY, f64::min)
        }
    };
    let ordered = extreme(ResistanceKind::ContentAdopt, true) < extreme(ResistanceKind::DiscontentAdopt, false)
        && extreme(ResistanceKind::DiscontentAdopt, true) < 2.0;
    sink.summary(&format!(
        "{passed}/{} fits within {}; content_adopt < discontent_adopt < 2: {ordered}",
        rows.len(),
        args.tolerance
    ));
    sink.finish()
}

pub fn gen_market(cfg: &ExperimentConfig, args: &GenArgs) -> Result<()> {
    let base = cfg.generate.unwrap_or(MarketGenSpec::new(0, 0, 0));
    let spec = MarketGenSpec {
        n: args.n.unwrap_or(base.n),
        m: args.m.unwrap_or(base.m),
        seed: args.seed.unwrap_or(base.seed),
        mode: args.mode.map(Into::into).unwrap_or(base.mode),
    };
    if spec.n == 0 || spec.m == 0 {
        bail!("--n and --m must both be at least 1");
    }
    let market = spec.generate()?;
    let raw = match spec.mode {
        Cardinalization::Rank => market.to_raw_ordinal(),
        Cardinalization::Uniform => market.to_raw(),
    };
    let mut sink = Sink::open(cfg.out(&args.out))?;
    sink.json(&raw)?;
    sink.finish()
}
