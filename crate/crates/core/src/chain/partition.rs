//! Classification of joint states and the recurrence diagnostics.
//!
//! A state is *aligned* when no proposer is watchful and every baseline
//! utility equals what the baseline profile actually pays. Aligned states
//! are exactly the fixed points of the unperturbed dynamics; they are split
//! into three classes by the match the baseline profile induces.

use serde::Serialize;

use super::{JointState, PerturbedChain, StateSpace};
use crate::market::{Market, MatchOutcome, ProposerId};
use crate::rule::Mood;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ZClass {
    /// Some matched proposer is not best-responding.
    C,
    /// Matched proposers all best-respond, the match is not stable.
    D,
    /// The baseline profile induces a stable match.
    E,
}

#[derive(Debug, Clone, Serialize)]
pub struct StatePartition {
    /// `None` for states outside the aligned set.
    pub classes: Vec<Option<ZClass>>,
    /// The aligned state whose baseline profile is the canonical POSM profile.
    pub e_star: usize,
}

impl StatePartition {
    pub fn count(&self, class: ZClass) -> usize {
        self.classes.iter().filter(|c| **c == Some(class)).count()
    }

    pub fn aligned_len(&self) -> usize {
        self.classes.iter().filter(|c| c.is_some()).count()
    }
}

pub fn is_aligned(market: &Market, state: &JointState) -> bool {
    if state.has_watchful() {
        return false;
    }
    let outcome = market.resolve_match(&state.baseline_profile());
    state
        .0
        .iter()
        .enumerate()
        .all(|(i, s)| s.baseline_utility == market.utility(ProposerId(i), &outcome))
}

pub fn classify_states(market: &Market, space: &StateSpace) -> StatePartition {
    let posm = market.gale_shapley();
    let posm_profile = posm.proposal_profile();
    let mut e_star = None;
    let classes = (0..space.len())
        .map(|k| {
            let state = space.state(k);
            if !is_aligned(market, &state) {
                return None;
            }
            let profile = state.baseline_profile();
            let outcome = market.resolve_match(&profile);
            if market.is_stable(&outcome) {
                if profile == posm_profile && moods_consistent(&state, &outcome) {
                    e_star = Some(k);
                }
                return Some(ZClass::E);
            }
            let lazy_matched = market
                .proposers()
                .any(|i| outcome.is_matched(i) && !market.is_best_responding(i, &profile));
            Some(if lazy_matched { ZClass::C } else { ZClass::D })
        })
        .collect();
    StatePartition {
        classes,
        e_star: e_star.expect("the POSM profile has an aligned state"),
    }
}

/// Matched proposers content, unmatched proposers discontent.
fn moods_consistent(state: &JointState, outcome: &MatchOutcome) -> bool {
    state.0.iter().enumerate().all(|(i, s)| {
        let want = if outcome.is_matched(ProposerId(i)) {
            Mood::Content
        } else {
            Mood::Discontent
        };
        s.mood == want
    })
}

/// Stationary mass on states whose baseline profile induces the POSM with
/// consistent moods.
pub fn posm_mass(chain: &PerturbedChain, pi: &[f64]) -> f64 {
    let market = chain.market();
    let posm = market.gale_shapley();
    pi.iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .filter(|(k, _)| {
            let state = chain.state(*k);
            let outcome = market.resolve_match(&state.baseline_profile());
            outcome == posm && moods_consistent(&state, &outcome)
        })
        .map(|(_, p)| p)
        .sum()
}

/// Worst-case behaviour of a chain near the unperturbed limit over a set
/// of states.
#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceReport {
    pub aligned_states: usize,
    pub watchful_states: usize,
    /// Non-watchful states whose baseline utility disagrees with the
    /// baseline profile; they are neither fixed points nor watchful.
    pub misaligned_states: usize,
    pub min_aligned_self_loop: f64,
    pub worst_aligned: Option<usize>,
    /// Largest one-step mass a watchful state leaves outside the aligned set.
    pub max_watchful_leak: f64,
    pub worst_watchful: Option<usize>,
}

impl RecurrenceReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.min_aligned_self_loop >= 1.0 - tolerance && self.max_watchful_leak <= tolerance
    }
}

/// Scans `states` (all states when `None`).
pub fn recurrence_report(chain: &PerturbedChain, states: Option<&[usize]>) -> RecurrenceReport {
    let market = chain.market();
    let aligned: Vec<bool> = (0..chain.len()).map(|k| is_aligned(market, &chain.state(k))).collect();
    let all: Vec<usize>;
    let scope = match states {
        Some(s) => s,
        None => {
            all = (0..chain.len()).collect();
            &all
        }
    };
    let mut report = RecurrenceReport {
        aligned_states: 0,
        watchful_states: 0,
        misaligned_states: 0,
        min_aligned_self_loop: 1.0,
        worst_aligned: None,
        max_watchful_leak: 0.0,
        worst_watchful: None,
    };
    for &k in scope {
        if aligned[k] {
            report.aligned_states += 1;
            let p = chain.probability(k, k);
            if p < report.min_aligned_self_loop || report.worst_aligned.is_none() {
                report.min_aligned_self_loop = p;
                report.worst_aligned = Some(k);
            }
        } else if chain.state(k).has_watchful() {
            report.watchful_states += 1;
            let (cols, vals) = chain.row(k);
            let leak: f64 = cols
                .iter()
                .zip(vals)
                .filter(|(&c, _)| !aligned[c])
                .map(|(_, v)| v)
                .sum();
            if leak > report.max_watchful_leak || report.worst_watchful.is_none() {
                report.max_watchful_leak = leak;
                report.worst_watchful = Some(k);
            }
        } else {
            report.misaligned_states += 1;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_chain;
    use crate::fixtures;
    use crate::market::{AcceptorId, Action};
    use crate::rule::{ProposerState, RuleParams};

    const A1: Action = Action::Propose(AcceptorId(0));
    const A2: Action = Action::Propose(AcceptorId(1));

    #[test]
    fn partition_covers_aligned_states() {
        let m2 = fixtures::m2();
        let space = StateSpace::new(&m2).unwrap();
        let part = classify_states(&m2, &space);
        let total = part.count(ZClass::C) + part.count(ZClass::D) + part.count(ZClass::E);
        assert_eq!(total, part.aligned_len());
        assert_eq!(part.classes[part.e_star], Some(ZClass::E));
        let e = space.state(part.e_star);
        assert_eq!(
            e.0,
            vec![ProposerState::content(A2, 0.5), ProposerState::content(A1, 1.0)]
        );
    }

    #[test]
    fn both_on_top_choice_is_c() {
        // P1 rejected at A1 while A2 would take it
        let m2 = fixtures::m2();
        let space = StateSpace::new(&m2).unwrap();
        let part = classify_states(&m2, &space);
        let k = space
            .index_of(&[ProposerState::content(A1, 0.0), ProposerState::content(A1, 1.0)])
            .unwrap();
        assert_eq!(part.classes[k], Some(ZClass::D));
        let k = space
            .index_of(&[ProposerState::content(A1, 1.0), ProposerState::content(A2, 0.5)])
            .unwrap();
        assert_eq!(part.classes[k], Some(ZClass::C));
    }

    #[test]
    fn all_discontent_is_d() {
        let m2 = fixtures::m2();
        let space = StateSpace::new(&m2).unwrap();
        let part = classify_states(&m2, &space);
        let k = space
            .index_of(&[ProposerState::discontent(), ProposerState::discontent()])
            .unwrap();
        assert_eq!(part.classes[k], Some(ZClass::D));
    }

    #[test]
    fn misaligned_and_watchful_are_outside() {
        let m2 = fixtures::m2();
        let space = StateSpace::new(&m2).unwrap();
        let part = classify_states(&m2, &space);
        let stale = space
            .index_of(&[ProposerState::content(A2, 0.0), ProposerState::content(A1, 1.0)])
            .unwrap();
        assert_eq!(part.classes[stale], None);
        let w = space
            .index_of(&[ProposerState::watchful(A2, 0.5), ProposerState::content(A1, 1.0)])
            .unwrap();
        assert_eq!(part.classes[w], None);
    }

    #[test]
    fn single_pair_posm_mass_grows() {
        let m = crate::market::Market::from_rankings(&[vec![0]], &[vec![0]]).unwrap();
        let mut last = 0.0;
        for eps in [0.2, 0.05, 0.01] {
            let chain = build_chain(&m, &RuleParams::new(eps).unwrap()).unwrap();
            let st = crate::chain::stationary_distribution(&chain).unwrap();
            let mass = posm_mass(&chain, &st.pi);
            assert!(mass >= last);
            last = mass;
        }
        assert!(last > 0.95, "{last}");
    }
}
