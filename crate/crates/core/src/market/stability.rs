use std::collections::VecDeque;

use super::{AcceptorId, Market, MarketError, MatchOutcome, ProposerId};

/// Exhaustive routines refuse markets with more than this many agents on
/// either side.
pub const ENUMERATION_LIMIT: usize = 8;

impl Market {
    pub(crate) fn check_enumerable(&self, limit: usize) -> Result<(), MarketError> {
        if self.n() > limit || self.m() > limit {
            return Err(MarketError::TooLarge {
                n: self.n(),
                m: self.m(),
                limit,
            });
        }
        Ok(())
    }

    /// Pairs that strictly prefer each other to their partners in `outcome`.
    pub fn blocking_pairs(&self, outcome: &MatchOutcome) -> Vec<(ProposerId, AcceptorId)> {
        let mut out = Vec::new();
        for i in self.proposers() {
            let current = self.utility(i, outcome);
            for j in self.acceptors() {
                if self.proposer_value(i, j) > current && self.acceptor_value(j, i) > self.acceptor_utility(j, outcome)
                {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_stable(&self, outcome: &MatchOutcome) -> bool {
        self.blocking_pairs(outcome).is_empty()
    }

    /// Proposer-proposing deferred acceptance. Returns the proposer-optimal
    /// stable match.
    pub fn gale_shapley(&self) -> MatchOutcome {
        let rankings: Vec<Vec<AcceptorId>> = self.proposers().map(|i| self.proposer_ranking(i)).collect();
        let mut next = vec![0usize; self.n()];
        let mut held: Vec<Option<ProposerId>> = vec![None; self.m()];
        let mut free: VecDeque<ProposerId> = self.proposers().collect();

        while let Some(p) = free.pop_front() {
            let Some(&j) = rankings[p.0].get(next[p.0]) else {
                continue;
            };
            next[p.0] += 1;
            match held[j.0] {
                None => held[j.0] = Some(p),
                Some(q) if self.acceptor_value(j, p) > self.acceptor_value(j, q) => {
                    held[j.0] = Some(p);
                    free.push_back(q);
                }
                Some(_) => free.push_back(p),
            }
        }

        let pairs: Vec<(usize, usize)> = held
            .iter()
            .enumerate()
            .filter_map(|(j, p)| p.map(|p| (p.0, j)))
            .collect();
        MatchOutcome::from_pairs(self.n(), self.m(), &pairs)
    }

    /// Every stable match, found by exhaustive search over partial
    /// injective pairings.
    pub fn enumerate_stable_matches(&self) -> Result<Vec<MatchOutcome>, MarketError> {
        self.check_enumerable(ENUMERATION_LIMIT)?;
        let mut found = Vec::new();
        let mut partner: Vec<Option<AcceptorId>> = vec![None; self.n()];
        let mut taken = vec![false; self.m()];
        self.enumerate_from(0, &mut partner, &mut taken, &mut found);
        Ok(found)
    }

    fn enumerate_from(
        &self,
        i: usize,
        partner: &mut Vec<Option<AcceptorId>>,
        taken: &mut Vec<bool>,
        found: &mut Vec<MatchOutcome>,
    ) {
        if i == self.n() {
            let outcome = MatchOutcome::from_proposer_partners(partner, self.m());
            if self.is_stable(&outcome) {
                found.push(outcome);
            }
            return;
        }
        partner[i] = None;
        self.enumerate_from(i + 1, partner, taken, found);
        for j in 0..self.m() {
            if taken[j] {
                continue;
            }
            taken[j] = true;
            partner[i] = Some(AcceptorId(j));
            self.enumerate_from(i + 1, partner, taken, found);
            taken[j] = false;
        }
        partner[i] = None;
    }

    /// True when every proposer weakly prefers their partner in `a` to
    /// their partner in `b`.
    pub fn proposer_weakly_prefers(&self, a: &MatchOutcome, b: &MatchOutcome) -> bool {
        self.proposers().all(|i| self.utility(i, a) >= self.utility(i, b))
    }
}
