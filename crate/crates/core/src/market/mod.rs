//! Static two-sided market model.
//!
//! A [`Market`] holds two disjoint sides, proposers and acceptors, each with
//! a complete strict cardinal preference over the other side. Values lie in
//! `(0, 1]` and being unmatched is worth exactly `0`. Acceptors are not
//! strategic: given an action profile each one keeps its most preferred
//! proposal and rejects the rest ([`Market::resolve_match`]).

mod dynamics;
mod json;
mod stability;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dynamics::{BrStep, NashReport};
pub use json::{PrefSpec, RawMarket};
pub use stability::ENUMERATION_LIMIT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProposerId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AcceptorId(pub usize);

/// A proposer's move in the one-shot game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Propose(AcceptorId),
    /// Remain single. Also the baseline of a discontent proposer.
    Single,
}

impl Action {
    pub fn target(self) -> Option<AcceptorId> {
        match self {
            Action::Propose(a) => Some(a),
            Action::Single => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Proposers,
    Acceptors,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Proposers => f.write_str("proposers"),
            Side::Acceptors => f.write_str("acceptors"),
        }
    }
}

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("{agent} assigns the same value {value} to more than one partner")]
    DuplicateValue { agent: String, value: f64 },
    #[error("{agent} lists {partner} more than once")]
    DuplicateEntry { agent: String, partner: String },
    #[error("{agent} does not rank {missing}")]
    IncompleteOrdering { agent: String, missing: String },
    #[error("{agent} assigns {partner} the value {value}, outside (0, 1]")]
    OutOfRangeValue { agent: String, partner: String, value: f64 },
    #[error("market has no {0}")]
    EmptySide(Side),
    #[error("{agent} references unknown agent {name}")]
    UnknownAgent { agent: String, name: String },
    #[error("agent name {0} is used more than once")]
    DuplicateName(String),
    #[error("market is {n}x{m}; exhaustive routines are limited to {limit}x{limit}")]
    TooLarge { n: usize, m: usize, limit: usize },
    #[error("proposer {0} is unmatched in the given match")]
    NotMatched(String),
    #[error("best-response dynamics did not settle within {0} steps")]
    NoConvergence(usize),
    #[error("invalid market JSON")]
    Parse(#[from] serde_json::Error),
}

/// A validated market. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    proposers: Vec<String>,
    acceptors: Vec<String>,
    /// `proposer_values[i][j]`: value of acceptor `j` to proposer `i`.
    proposer_values: Vec<Vec<f64>>,
    /// `acceptor_values[j][i]`: value of proposer `i` to acceptor `j`.
    acceptor_values: Vec<Vec<f64>>,
}

impl Market {
    /// Builds a market from dense value tables, checking every invariant.
    pub fn new(
        proposers: Vec<String>,
        acceptors: Vec<String>,
        proposer_values: Vec<Vec<f64>>,
        acceptor_values: Vec<Vec<f64>>,
    ) -> Result<Self, MarketError> {
        if proposers.is_empty() {
            return Err(MarketError::EmptySide(Side::Proposers));
        }
        if acceptors.is_empty() {
            return Err(MarketError::EmptySide(Side::Acceptors));
        }
        check_names(&proposers, &acceptors)?;
        check_table(&proposers, &acceptors, &proposer_values)?;
        check_table(&acceptors, &proposers, &acceptor_values)?;
        Ok(Market {
            proposers,
            acceptors,
            proposer_values,
            acceptor_values,
        })
    }

    /// Builds a market from ordinal rankings (best first), cardinalized by
    /// mapping rank `r` of `k` to `(k - r + 1) / k`.
    pub fn from_rankings(
        proposer_rankings: &[Vec<usize>],
        acceptor_rankings: &[Vec<usize>],
    ) -> Result<Self, MarketError> {
        let n = proposer_rankings.len();
        let m = acceptor_rankings.len();
        let proposers = (1..=n).map(|i| format!("P{i}")).collect::<Vec<_>>();
        let acceptors = (1..=m).map(|j| format!("A{j}")).collect::<Vec<_>>();
        let pv = rankings_to_values(&proposers, &acceptors, proposer_rankings)?;
        let av = rankings_to_values(&acceptors, &proposers, acceptor_rankings)?;
        Market::new(proposers, acceptors, pv, av)
    }

    pub fn n(&self) -> usize {
        self.proposers.len()
    }

    pub fn m(&self) -> usize {
        self.acceptors.len()
    }

    pub fn proposer_name(&self, i: ProposerId) -> &str {
        &self.proposers[i.0]
    }

    pub fn acceptor_name(&self, j: AcceptorId) -> &str {
        &self.acceptors[j.0]
    }

    pub fn proposer_names(&self) -> &[String] {
        &self.proposers
    }

    pub fn acceptor_names(&self) -> &[String] {
        &self.acceptors
    }

    pub fn proposers(&self) -> impl Iterator<Item = ProposerId> {
        (0..self.n()).map(ProposerId)
    }

    pub fn acceptors(&self) -> impl Iterator<Item = AcceptorId> {
        (0..self.m()).map(AcceptorId)
    }

    /// Value of `j` to proposer `i`.
    pub fn proposer_value(&self, i: ProposerId, j: AcceptorId) -> f64 {
        self.proposer_values[i.0][j.0]
    }

    /// Value of `i` to acceptor `j`.
    pub fn acceptor_value(&self, j: AcceptorId, i: ProposerId) -> f64 {
        self.acceptor_values[j.0][i.0]
    }

    pub fn proposer_values(&self) -> &[Vec<f64>] {
        &self.proposer_values
    }

    pub fn acceptor_values(&self) -> &[Vec<f64>] {
        &self.acceptor_values
    }

    /// Acceptors in proposer `i`'s order, most preferred first.
    pub fn proposer_ranking(&self, i: ProposerId) -> Vec<AcceptorId> {
        let mut order: Vec<AcceptorId> = self.acceptors().collect();
        order.sort_by(|a, b| self.proposer_value(i, *b).total_cmp(&self.proposer_value(i, *a)));
        order
    }

    /// Proposers in acceptor `j`'s order, most preferred first.
    pub fn acceptor_ranking(&self, j: AcceptorId) -> Vec<ProposerId> {
        let mut order: Vec<ProposerId> = self.proposers().collect();
        order.sort_by(|a, b| self.acceptor_value(j, *b).total_cmp(&self.acceptor_value(j, *a)));
        order
    }

    /// Deterministic acceptor behaviour: each acceptor keeps its favourite
    /// among the proposers targeting it.
    pub fn resolve_match(&self, profile: &[Action]) -> MatchOutcome {
        assert_eq!(profile.len(), self.n(), "action profile length must equal n");
        let mut acceptor_partner: Vec<Option<ProposerId>> = vec![None; self.m()];
        for (i, action) in profile.iter().enumerate() {
            let Action::Propose(j) = *action else { continue };
            let p = ProposerId(i);
            let slot = &mut acceptor_partner[j.0];
            match *slot {
                Some(held) if self.acceptor_value(j, held) >= self.acceptor_value(j, p) => {}
                _ => *slot = Some(p),
            }
        }
        let mut proposer_partner = vec![None; self.n()];
        for (j, held) in acceptor_partner.iter().enumerate() {
            if let Some(p) = held {
                proposer_partner[p.0] = Some(AcceptorId(j));
            }
        }
        MatchOutcome {
            proposer_partner,
            acceptor_partner,
        }
    }

    /// Utility of proposer `i` under `outcome`; 0 when unmatched.
    pub fn utility(&self, i: ProposerId, outcome: &MatchOutcome) -> f64 {
        outcome.proposer_partner(i).map_or(0.0, |j| self.proposer_value(i, j))
    }

    /// Per-proposer utilities under `outcome`.
    pub fn utilities(&self, outcome: &MatchOutcome) -> Vec<f64> {
        self.proposers().map(|i| self.utility(i, outcome)).collect()
    }

    /// Value acceptor `j` derives from `outcome`; 0 when unmatched.
    pub fn acceptor_utility(&self, j: AcceptorId, outcome: &MatchOutcome) -> f64 {
        outcome.acceptor_partner(j).map_or(0.0, |i| self.acceptor_value(j, i))
    }

    /// Sorted set of values proposer `i` can ever realize, including 0.
    pub fn admissible_utilities(&self, i: ProposerId) -> Vec<f64> {
        let mut vals = Vec::with_capacity(self.m() + 1);
        vals.push(0.0);
        vals.extend(self.proposer_values[i.0].iter().copied());
        vals.sort_by(f64::total_cmp);
        vals
    }

    pub fn describe_action(&self, action: Action) -> String {
        match action {
            Action::Propose(j) => self.acceptor_name(j).to_string(),
            Action::Single => "-".to_string(),
        }
    }

    /// `(P1,A2) (P2,A1)` style rendering of the matched pairs.
    pub fn describe_match(&self, outcome: &MatchOutcome) -> String {
        let pairs: Vec<String> = outcome
            .pairs()
            .map(|(i, j)| format!("({},{})", self.proposer_name(i), self.acceptor_name(j)))
            .collect();
        if pairs.is_empty() {
            "(empty)".to_string()
        } else {
            pairs.join(" ")
        }
    }
}

fn check_names(proposers: &[String], acceptors: &[String]) -> Result<(), MarketError> {
    let mut seen = std::collections::HashSet::new();
    for name in proposers.iter().chain(acceptors) {
        if !seen.insert(name.as_str()) {
            return Err(MarketError::DuplicateName(name.clone()));
        }
    }
    Ok(())
}

fn check_table(owners: &[String], partners: &[String], table: &[Vec<f64>]) -> Result<(), MarketError> {
    assert_eq!(table.len(), owners.len(), "one value row per agent");
    for (owner, row) in owners.iter().zip(table) {
        if row.len() < partners.len() {
            return Err(MarketError::IncompleteOrdering {
                agent: owner.clone(),
                missing: partners[row.len()].clone(),
            });
        }
        for (partner, &v) in partners.iter().zip(row) {
            if !(v > 0.0 && v <= 1.0) {
                return Err(MarketError::OutOfRangeValue {
                    agent: owner.clone(),
                    partner: partner.clone(),
                    value: v,
                });
            }
        }
        let mut sorted = row.clone();
        sorted.sort_by(f64::total_cmp);
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(MarketError::DuplicateValue {
                agent: owner.clone(),
                value: w[0],
            });
        }
    }
    Ok(())
}

/// Rank `r` (1-based) of `k` maps to `(k - r + 1) / k`.
pub fn rank_value(rank: usize, k: usize) -> f64 {
    (k - rank + 1) as f64 / k as f64
}

fn rankings_to_values(
    owners: &[String],
    partners: &[String],
    rankings: &[Vec<usize>],
) -> Result<Vec<Vec<f64>>, MarketError> {
    let k = partners.len();
    owners
        .iter()
        .zip(rankings)
        .map(|(owner, ranking)| {
            let mut row = vec![f64::NAN; k];
            for (pos, &p) in ranking.iter().enumerate() {
                let Some(name) = partners.get(p) else {
                    return Err(MarketError::UnknownAgent {
                        agent: owner.clone(),
                        name: format!("#{p}"),
                    });
                };
                if !row[p].is_nan() {
                    return Err(MarketError::DuplicateEntry {
                        agent: owner.clone(),
                        partner: name.clone(),
                    });
                }
                row[p] = rank_value(pos + 1, k);
            }
            if let Some(missing) = row.iter().position(|v| v.is_nan()) {
                return Err(MarketError::IncompleteOrdering {
                    agent: owner.clone(),
                    missing: partners[missing].clone(),
                });
            }
            Ok(row)
        })
        .collect()
}

/// A partial one-to-one pairing, indexed from both sides.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatchOutcome {
    proposer_partner: Vec<Option<AcceptorId>>,
    acceptor_partner: Vec<Option<ProposerId>>,
}

impl MatchOutcome {
    pub fn empty(n: usize, m: usize) -> Self {
        MatchOutcome {
            proposer_partner: vec![None; n],
            acceptor_partner: vec![None; m],
        }
    }

    /// Builds a match from explicit pairs.
    ///
    /// Panics if a proposer or acceptor appears in two pairs.
    pub fn from_pairs(n: usize, m: usize, pairs: &[(usize, usize)]) -> Self {
        let mut out = MatchOutcome::empty(n, m);
        for &(i, j) in pairs {
            assert!(out.proposer_partner[i].is_none(), "proposer {i} paired twice");
            assert!(out.acceptor_partner[j].is_none(), "acceptor {j} paired twice");
            out.proposer_partner[i] = Some(AcceptorId(j));
            out.acceptor_partner[j] = Some(ProposerId(i));
        }
        out
    }

    /// Rebuilds a match from the proposer-side partner vector.
    pub fn from_proposer_partners(partners: &[Option<AcceptorId>], m: usize) -> Self {
        let pairs: Vec<(usize, usize)> = partners
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|j| (i, j.0)))
            .collect();
        MatchOutcome::from_pairs(partners.len(), m, &pairs)
    }

    pub fn proposer_partner(&self, i: ProposerId) -> Option<AcceptorId> {
        self.proposer_partner[i.0]
    }

    pub fn acceptor_partner(&self, j: AcceptorId) -> Option<ProposerId> {
        self.acceptor_partner[j.0]
    }

    pub fn proposer_partners(&self) -> &[Option<AcceptorId>] {
        &self.proposer_partner
    }

    pub fn acceptor_partners(&self) -> &[Option<ProposerId>] {
        &self.acceptor_partner
    }

    pub fn pairs(&self) -> impl Iterator<Item = (ProposerId, AcceptorId)> + '_ {
        self.proposer_partner
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|j| (ProposerId(i), j)))
    }

    pub fn is_matched(&self, i: ProposerId) -> bool {
        self.proposer_partner[i.0].is_some()
    }

    /// Checks the two-sided bookkeeping agrees.
    pub fn is_consistent(&self) -> bool {
        let forward = self.proposer_partner.iter().enumerate().all(|(i, p)| match p {
            Some(j) => self.acceptor_partner.get(j.0) == Some(&Some(ProposerId(i))),
            None => true,
        });
        let backward = self.acceptor_partner.iter().enumerate().all(|(j, p)| match p {
            Some(i) => self.proposer_partner.get(i.0) == Some(&Some(AcceptorId(j))),
            None => true,
        });
        forward && backward
    }

    /// The canonical profile inducing this match: matched proposers propose
    /// to their partner, everyone else stays single.
    pub fn proposal_profile(&self) -> Vec<Action> {
        self.proposer_partner
            .iter()
            .map(|p| p.map_or(Action::Single, Action::Propose))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn names(prefix: &str, k: usize) -> Vec<String> {
        (1..=k).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn rank_conversion_for_two_acceptors() {
        assert_eq!(rank_value(1, 2), 1.0);
        assert_eq!(rank_value(2, 2), 0.5);
        let m = Market::from_rankings(&[vec![0, 1]], &[vec![0], vec![0]]).unwrap();
        assert_eq!(m.proposer_value(ProposerId(0), AcceptorId(0)), 1.0);
        assert_eq!(m.proposer_value(ProposerId(0), AcceptorId(1)), 0.5);
    }

    #[test]
    fn duplicate_value_rejected() {
        let err = Market::new(
            names("P", 1),
            names("A", 2),
            vec![vec![1.0, 1.0]],
            vec![vec![1.0], vec![1.0]],
        )
        .unwrap_err();
        assert!(matches!(err, MarketError::DuplicateValue { .. }));
    }

    #[test]
    fn zero_value_out_of_range() {
        let err = Market::new(names("P", 1), names("A", 1), vec![vec![0.0]], vec![vec![1.0]]).unwrap_err();
        assert!(matches!(err, MarketError::OutOfRangeValue { .. }));
        let err = Market::new(names("P", 1), names("A", 1), vec![vec![1.5]], vec![vec![1.0]]).unwrap_err();
        assert!(matches!(err, MarketError::OutOfRangeValue { .. }));
        let err = Market::new(names("P", 1), names("A", 1), vec![vec![f64::NAN]], vec![vec![1.0]]).unwrap_err();
        assert!(matches!(err, MarketError::OutOfRangeValue { .. }));
    }

    #[test]
    fn empty_sides_and_incomplete_rows() {
        assert!(matches!(
            Market::new(vec![], names("A", 1), vec![], vec![vec![]]),
            Err(MarketError::EmptySide(Side::Proposers))
        ));
        assert!(matches!(
            Market::new(names("P", 1), vec![], vec![vec![]], vec![]),
            Err(MarketError::EmptySide(Side::Acceptors))
        ));
        assert!(matches!(
            Market::new(
                names("P", 1),
                names("A", 2),
                vec![vec![1.0]],
                vec![vec![1.0], vec![1.0]]
            ),
            Err(MarketError::IncompleteOrdering { .. })
        ));
        assert!(matches!(
            Market::from_rankings(&[vec![0, 0]], &[vec![0], vec![0]]),
            Err(MarketError::DuplicateEntry { .. })
        ));
    }

    #[test]
    fn resolve_contested_proposal() {
        let m2 = fixtures::m2();
        let a = [Action::Propose(AcceptorId(0)), Action::Propose(AcceptorId(0))];
        let mu = m2.resolve_match(&a);
        assert_eq!(mu.acceptor_partner(AcceptorId(0)), Some(ProposerId(1)));
        assert_eq!(mu.proposer_partner(ProposerId(0)), None);
        assert_eq!(mu.acceptor_partner(AcceptorId(1)), None);
        assert!(mu.is_consistent());
    }

    #[test]
    fn resolve_trivial_profiles() {
        let m2 = fixtures::m2();
        let mu = m2.resolve_match(&[Action::Single, Action::Single]);
        assert_eq!(mu, MatchOutcome::empty(2, 2));

        let solo = Market::from_rankings(&[vec![0]], &[vec![0]]).unwrap();
        let mu = solo.resolve_match(&[Action::Propose(AcceptorId(0))]);
        assert_eq!(mu, MatchOutcome::from_pairs(1, 1, &[(0, 0)]));
    }

    #[test]
    fn utilities_on_m2() {
        let m2 = fixtures::m2();
        let mu = MatchOutcome::from_pairs(2, 2, &[(0, 1), (1, 0)]);
        assert_eq!(m2.utility(ProposerId(0), &mu), 0.5);
        assert_eq!(m2.utility(ProposerId(1), &mu), 1.0);
        let empty = MatchOutcome::empty(2, 2);
        assert_eq!(m2.utility(ProposerId(0), &empty), 0.0);
    }

    #[test]
    fn admissible_utilities_include_zero() {
        let m2 = fixtures::m2();
        assert_eq!(m2.admissible_utilities(ProposerId(0)), vec![0.0, 0.5, 1.0]);
    }
}
