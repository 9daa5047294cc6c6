//! Exact analysis of the learning dynamics as a perturbed Markov chain.
//!
//! The joint state is one [`ProposerState`] per proposer, with baseline
//! utilities drawn from the finite set of values the proposer can realize.
//! [`build_chain`] marginalizes the action-selection and state-update laws
//! exactly, giving a sparse row-stochastic matrix for a fixed epsilon.

mod build;
mod export;
mod partition;
mod resistance;
mod solve;

use serde::Serialize;
use thiserror::Error;

use crate::market::{AcceptorId, Action, Market, ProposerId};
use crate::rule::{Mood, ProposerState, RuleError};

pub use build::{build_chain, transition_row, PerturbedChain};
pub use export::{write_legend_json, write_pi_csv, write_triplets_csv};
pub use partition::{
    classify_states, is_aligned, posm_mass, recurrence_report, RecurrenceReport, StatePartition, ZClass,
};
pub use resistance::{
    elementary_transitions, fit_slope, resistance_slope, theoretical_resistance, transition_probability,
    ElementaryTransition, ResistanceKind, SlopeFit,
};
pub use solve::{closed_classes, stationary_distribution, stationary_with, Solver, Stationary, DIRECT_SOLVE_LIMIT};

/// Largest joint state space the analysis will enumerate.
pub const STATE_LIMIT: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("state space has {states} states, above the limit of {limit}")]
    TooLarge { states: u128, limit: usize },
    #[error("chain has {0} closed communicating classes; the stationary distribution is not unique")]
    Reducible(usize),
    #[error("power iteration stopped after {iterations} iterations with residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("slope fit needs at least 4 epsilon values, got {0}")]
    GridTooSmall(usize),
    #[error("transition has zero probability at epsilon = {0}")]
    ZeroProbability(f64),
    #[error(transparent)]
    Rule(#[from] RuleError),
}

/// One state of every proposer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointState(pub Vec<ProposerState>);

impl JointState {
    pub fn has_watchful(&self) -> bool {
        self.0.iter().any(|s| s.mood == Mood::Watchful)
    }

    pub fn baseline_profile(&self) -> Vec<Action> {
        self.0.iter().map(|s| s.baseline).collect()
    }

    pub fn get(&self, i: ProposerId) -> &ProposerState {
        &self.0[i.0]
    }

    pub fn describe(&self, market: &Market) -> String {
        self.0
            .iter()
            .map(|s| {
                format!(
                    "({},{},{})",
                    s.mood.letter(),
                    market.describe_action(s.baseline),
                    s.baseline_utility
                )
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Mixed-radix indexing of the joint state space.
///
/// Per proposer the local states are: the discontent state, then every
/// content and every watchful combination of baseline action and
/// admissible baseline utility.
#[derive(Debug, Clone)]
pub struct StateSpace {
    m: usize,
    utilities: Vec<Vec<f64>>,
    per_agent: usize,
    strides: Vec<usize>,
    len: usize,
}

impl StateSpace {
    pub fn new(market: &Market) -> Result<Self, ChainError> {
        let m = market.m();
        let per_agent = 2 * (m + 1) * (m + 1) + 1;
        let total = (per_agent as u128).checked_pow(market.n() as u32).unwrap_or(u128::MAX);
        if total > STATE_LIMIT as u128 {
            return Err(ChainError::TooLarge {
                states: total,
                limit: STATE_LIMIT,
            });
        }
        let mut strides = Vec::with_capacity(market.n());
        let mut acc = 1;
        for _ in 0..market.n() {
            strides.push(acc);
            acc *= per_agent;
        }
        Ok(StateSpace {
            m,
            utilities: market.proposers().map(|i| market.admissible_utilities(i)).collect(),
            per_agent,
            strides,
            len: acc,
        })
    }

    /// Upper bound before removing invalid discontent states:
    /// `prod_i 3 (m+1)^2`.
    pub fn unpruned_len(market: &Market) -> u128 {
        (3 * (market.m() as u128 + 1).pow(2)).pow(market.n() as u32)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n(&self) -> usize {
        self.strides.len()
    }

    pub fn per_agent(&self) -> usize {
        self.per_agent
    }

    fn action_index(&self, a: Action) -> usize {
        match a {
            Action::Propose(j) => j.0,
            Action::Single => self.m,
        }
    }

    fn action_at(&self, k: usize) -> Action {
        if k == self.m {
            Action::Single
        } else {
            Action::Propose(AcceptorId(k))
        }
    }

    pub fn local_index(&self, i: usize, s: &ProposerState) -> Option<usize> {
        let block = (self.m + 1) * (self.m + 1);
        let offset = match s.mood {
            Mood::Discontent => {
                return (s.baseline == Action::Single && s.baseline_utility == 0.0).then_some(0);
            }
            Mood::Content => 1,
            Mood::Watchful => 1 + block,
        };
        if let Action::Propose(j) = s.baseline {
            if j.0 >= self.m {
                return None;
            }
        }
        let u = self.utilities[i].iter().position(|&v| v == s.baseline_utility)?;
        Some(offset + self.action_index(s.baseline) * (self.m + 1) + u)
    }

    pub fn local_state(&self, i: usize, k: usize) -> ProposerState {
        if k == 0 {
            return ProposerState::discontent();
        }
        let block = (self.m + 1) * (self.m + 1);
        let (mood, r) = if k <= block {
            (Mood::Content, k - 1)
        } else {
            (Mood::Watchful, k - 1 - block)
        };
        ProposerState {
            mood,
            baseline: self.action_at(r / (self.m + 1)),
            baseline_utility: self.utilities[i][r % (self.m + 1)],
        }
    }

    pub fn index_of(&self, states: &[ProposerState]) -> Option<usize> {
        if states.len() != self.n() {
            return None;
        }
        let mut idx = 0;
        for (i, s) in states.iter().enumerate() {
            idx += self.local_index(i, s)? * self.strides[i];
        }
        Some(idx)
    }

    pub fn state(&self, idx: usize) -> JointState {
        JointState(
            (0..self.n())
                .map(|i| self.local_state(i, (idx / self.strides[i]) % self.per_agent))
                .collect(),
        )
    }

    pub(crate) fn stride(&self, i: usize) -> usize {
        self.strides[i]
    }
}

/// Every joint state of the market, in index order.
pub fn enumerate_states(market: &Market) -> Result<Vec<JointState>, ChainError> {
    let space = StateSpace::new(market)?;
    Ok((0..space.len()).map(|k| space.state(k)).collect())
}
