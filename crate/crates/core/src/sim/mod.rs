//! The repeated matching game.
//!
//! Every timestep all proposers pick an action at once, acceptors resolve
//! the proposals, and each proposer updates its own state from its own
//! event and realized utility. A [`Learner`] owns its state and a private
//! random stream; [`Learner::observe`] is the only channel through which
//! anything about the market reaches it.

mod output;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{AcceptorId, Action, Market, MatchOutcome};
use crate::rule::{self, ProposerState, RuleError, RuleParams, SelectionEvent};

pub use output::{write_metrics_csv, write_trace_csv, write_trace_row, METRICS_CSV_HEADER, TRACE_CSV_HEADER};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("horizon must be at least 1 timestep")]
    EmptyHorizon,
    #[error("metrics window fraction {0} is outside (0, 1]")]
    InvalidWindow(f64),
    #[error(transparent)]
    Rule(#[from] RuleError),
}

/// One proposer: its state plus its own random stream.
#[derive(Debug, Clone)]
pub struct Learner {
    state: ProposerState,
    rng: ChaCha8Rng,
}

impl Learner {
    /// A discontent learner whose stream is derived from `(seed, index)`.
    pub fn new(seed: u64, index: usize) -> Self {
        Learner::with_state(ProposerState::discontent(), seed, index)
    }

    pub fn with_state(state: ProposerState, seed: u64, index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64 + 1);
        Learner { state, rng }
    }

    pub fn state(&self) -> ProposerState {
        self.state
    }

    /// Chooses this timestep's action from `m` acceptors.
    pub fn act(&mut self, params: &RuleParams, m: usize) -> Result<SelectionEvent, RuleError> {
        rule::select_action(&self.state, params, m, &mut self.rng)
    }

    /// Feeds back the learner's own event and utility.
    pub fn observe(&mut self, event: SelectionEvent, utility: f64, params: &RuleParams) -> Result<(), RuleError> {
        self.state = rule::update_state(&self.state, event, utility, params, &mut self.rng)?;
        Ok(())
    }
}

/// Everything that happened in one timestep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub events: Vec<SelectionEvent>,
    pub outcome: MatchOutcome,
    pub utilities: Vec<f64>,
    /// States after the update.
    pub states: Vec<ProposerState>,
}

impl StepRecord {
    pub fn actions(&self) -> Vec<Action> {
        self.events.iter().map(|e| e.action).collect()
    }
}

/// Advances the market by one synchronous timestep.
pub fn step(market: &Market, learners: &mut [Learner], params: &RuleParams) -> Result<StepRecord, SimError> {
    assert_eq!(learners.len(), market.n(), "one learner per proposer");
    let events = learners
        .iter_mut()
        .map(|l| l.act(params, market.m()))
        .collect::<Result<Vec<_>, _>>()?;
    let actions: Vec<Action> = events.iter().map(|e| e.action).collect();
    let outcome = market.resolve_match(&actions);
    let utilities = market.utilities(&outcome);
    for ((learner, event), &u) in learners.iter_mut().zip(&events).zip(&utilities) {
        learner.observe(*event, u, params)?;
    }
    Ok(StepRecord {
        events,
        outcome,
        utilities,
        states: learners.iter().map(Learner::state).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceVerbosity {
    /// Metrics only.
    #[default]
    Summary,
    /// Keep every step record.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub rule: RuleParams,
    pub horizon: u64,
    pub seed: u64,
    #[serde(default)]
    pub verbosity: TraceVerbosity,
    /// Fraction of the horizon, counted from the end, used for metrics.
    #[serde(default = "default_window")]
    pub window: f64,
}

fn default_window() -> f64 {
    0.5
}

impl SimConfig {
    pub fn new(rule: RuleParams, horizon: u64, seed: u64) -> Self {
        SimConfig {
            rule,
            horizon,
            seed,
            verbosity: TraceVerbosity::Summary,
            window: default_window(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.horizon == 0 {
            return Err(SimError::EmptyHorizon);
        }
        if !(self.window > 0.0 && self.window <= 1.0) {
            return Err(SimError::InvalidWindow(self.window));
        }
        Ok(())
    }

    /// Number of final timesteps included in the metrics window.
    pub fn window_len(&self) -> u64 {
        ((self.window * self.horizon as f64).ceil() as u64).clamp(1, self.horizon)
    }

    /// First timestep (1-based) inside the metrics window.
    pub fn window_start(&self) -> u64 {
        self.horizon - self.window_len() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub seed: u64,
    pub epsilon: f64,
    pub horizon: u64,
    pub window_len: u64,
    /// Fraction of window steps whose induced match is the POSM.
    pub posm_frequency: f64,
    /// First timestep (1-based, whole run) at which the POSM was induced.
    pub time_to_first_posm: Option<u64>,
    pub stable_frequency: f64,
    /// Mean over the window of the summed proposer utilities.
    pub mean_welfare: f64,
    /// Window visit counts per induced match, most visited first.
    pub match_visits: Vec<(MatchOutcome, u64)>,
}

impl Metrics {
    pub fn modal_match(&self) -> Option<&MatchOutcome> {
        self.match_visits.first().map(|(m, _)| m)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimTrace {
    /// Every step when verbosity is [`TraceVerbosity::Full`], else empty.
    pub records: Vec<StepRecord>,
    pub final_states: Vec<ProposerState>,
    pub metrics: Metrics,
}

/// Runs `config.horizon` steps from the all-discontent start.
pub fn run(market: &Market, config: &SimConfig) -> Result<SimTrace, SimError> {
    run_with(market, config, |_, _| {})
}

/// Like [`run`], calling `observer(t, record)` after every step.
pub fn run_with<F>(market: &Market, config: &SimConfig, mut observer: F) -> Result<SimTrace, SimError>
where
    F: FnMut(u64, &StepRecord),
{
    config.validate()?;
    let posm = market.gale_shapley();
    let mut learners: Vec<Learner> = (0..market.n()).map(|i| Learner::new(config.seed, i)).collect();
    let window_start = config.window_start();

    let mut records = Vec::new();
    let mut visits: HashMap<Vec<Option<AcceptorId>>, u64> = HashMap::new();
    let mut posm_hits = 0u64;
    let mut welfare = 0.0;
    let mut first_posm = None;

    for t in 1..=config.horizon {
        let record = step(market, &mut learners, &config.rule)?;
        let at_posm = record.outcome == posm;
        if at_posm && first_posm.is_none() {
            first_posm = Some(t);
        }
        if t >= window_start {
            posm_hits += u64::from(at_posm);
            welfare += record.utilities.iter().sum::<f64>();
            match visits.get_mut(record.outcome.proposer_partners()) {
                Some(c) => *c += 1,
                None => {
                    visits.insert(record.outcome.proposer_partners().to_vec(), 1);
                }
            }
        }
        observer(t, &record);
        if config.verbosity == TraceVerbosity::Full {
            records.push(record);
        }
    }

    let window_len = config.window_len();
    let mut match_visits: Vec<(MatchOutcome, u64)> = visits
        .into_iter()
        .map(|(k, c)| (MatchOutcome::from_proposer_partners(&k, market.m()), c))
        .collect();
    match_visits.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let stable_steps: u64 = match_visits
        .iter()
        .filter(|(mu, _)| market.is_stable(mu))
        .map(|(_, c)| c)
        .sum();

    let metrics = Metrics {
        seed: config.seed,
        epsilon: config.rule.epsilon(),
        horizon: config.horizon,
        window_len,
        posm_frequency: posm_hits as f64 / window_len as f64,
        time_to_first_posm: first_posm,
        stable_frequency: stable_steps as f64 / window_len as f64,
        mean_welfare: welfare / window_len as f64,
        match_visits,
    };
    Ok(SimTrace {
        records,
        final_states: learners.iter().map(Learner::state).collect(),
        metrics,
    })
}

/// Independent runs of `config` for each seed, in seed order.
pub fn batch_run(market: &Market, config: &SimConfig, seeds: &[u64]) -> Result<Vec<Metrics>, SimError> {
    let configs: Vec<SimConfig> = seeds
        .iter()
        .map(|&seed| SimConfig {
            seed,
            verbosity: TraceVerbosity::Summary,
            ..*config
        })
        .collect();
    batch_run_configs(market, &configs)
}

/// Independent runs of each config, in input order.
pub fn batch_run_configs(market: &Market, configs: &[SimConfig]) -> Result<Vec<Metrics>, SimError> {
    configs
        .par_iter()
        .map(|c| run(market, c).map(|trace| trace.metrics))
        .collect()
}

/// Median of a sample; `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}
