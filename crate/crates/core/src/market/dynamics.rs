//! Best responses, best-response dynamics and the pure Nash scan.

use serde::Serialize;

use super::{AcceptorId, Action, Market, MarketError, MatchOutcome, ProposerId};

/// Profile scans enumerate `(m + 1)^n` profiles; keep them small.
const NASH_SCAN_LIMIT: usize = 4;

/// One update applied by [`Market::br_dynamics`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrStep {
    pub proposer: ProposerId,
    pub from: Action,
    pub to: Action,
    /// 1 for a matched proposer improving, 2 for an unmatched one.
    pub phase: u8,
}

#[derive(Debug, Clone, Serialize)]
pub struct NashReport {
    pub nash_profiles: Vec<Vec<Action>>,
    /// Every Nash profile induces a stable match.
    pub all_nash_stable: bool,
    pub posm_profile_is_nash: bool,
    pub posm_welfare: f64,
    pub max_nash_welfare: f64,
}

impl NashReport {
    pub fn passed(&self) -> bool {
        self.all_nash_stable && self.posm_profile_is_nash && self.posm_welfare >= self.max_nash_welfare
    }
}

impl Market {
    /// Would acceptor `j` keep proposer `i` against the other proposals in
    /// `profile`?
    pub fn would_accept(&self, j: AcceptorId, i: ProposerId, profile: &[Action]) -> bool {
        let mine = self.acceptor_value(j, i);
        profile
            .iter()
            .enumerate()
            .filter(|&(k, a)| k != i.0 && *a == Action::Propose(j))
            .all(|(k, _)| self.acceptor_value(j, ProposerId(k)) < mine)
    }

    /// Utility-maximizing action for `i` with everyone else held fixed.
    /// Ties at zero resolve to [`Action::Single`].
    pub fn best_response(&self, i: ProposerId, profile: &[Action]) -> Action {
        self.proposer_ranking(i)
            .into_iter()
            .find(|&j| self.would_accept(j, i, profile))
            .map_or(Action::Single, Action::Propose)
    }

    /// Utility `i` would get from playing `action` against `profile`.
    pub fn deviation_utility(&self, i: ProposerId, action: Action, profile: &[Action]) -> f64 {
        match action {
            Action::Single => 0.0,
            Action::Propose(j) if self.would_accept(j, i, profile) => self.proposer_value(i, j),
            Action::Propose(_) => 0.0,
        }
    }

    /// True if `i` has no strictly improving unilateral deviation.
    pub fn is_best_responding(&self, i: ProposerId, profile: &[Action]) -> bool {
        let current = self.deviation_utility(i, profile[i.0], profile);
        let best = self.deviation_utility(i, self.best_response(i, profile), profile);
        current >= best
    }

    /// Sequential best-response dynamics with a lowest-index-first schedule.
    ///
    /// Matched proposers that can improve go first; only when none remain
    /// does the lowest-index unmatched proposer with an accepting acceptor
    /// move.
    pub fn br_dynamics(&self, start: &[Action], max_steps: usize) -> Result<(Vec<Action>, Vec<BrStep>), MarketError> {
        let mut profile = start.to_vec();
        let mut steps = Vec::new();
        loop {
            let outcome = self.resolve_match(&profile);
            let Some((i, phase)) = self.next_mover(&profile, &outcome) else {
                return Ok((profile, steps));
            };
            if steps.len() == max_steps {
                return Err(MarketError::NoConvergence(max_steps));
            }
            let to = self.best_response(i, &profile);
            steps.push(BrStep {
                proposer: i,
                from: profile[i.0],
                to,
                phase,
            });
            profile[i.0] = to;
        }
    }

    fn next_mover(&self, profile: &[Action], outcome: &MatchOutcome) -> Option<(ProposerId, u8)> {
        let phase1 = self
            .proposers()
            .find(|&i| outcome.is_matched(i) && !self.is_best_responding(i, profile));
        if let Some(i) = phase1 {
            return Some((i, 1));
        }
        self.proposers()
            .find(|&i| !outcome.is_matched(i) && self.best_response(i, profile) != Action::Single)
            .map(|i| (i, 2))
    }

    /// The proposal profile of `stable` with proposer `i` made single.
    pub fn near_stable(&self, stable: &MatchOutcome, i: ProposerId) -> Result<Vec<Action>, MarketError> {
        if !stable.is_matched(i) {
            return Err(MarketError::NotMatched(self.proposer_name(i).to_string()));
        }
        let mut profile = stable.proposal_profile();
        profile[i.0] = Action::Single;
        Ok(profile)
    }

    pub fn welfare(&self, profile: &[Action]) -> f64 {
        self.utilities(&self.resolve_match(profile)).iter().sum()
    }

    pub fn is_nash(&self, profile: &[Action]) -> bool {
        self.proposers().all(|i| self.is_best_responding(i, profile))
    }

    /// Scans every pure profile and checks that Nash profiles induce stable
    /// matches and that the POSM profile maximizes welfare among them.
    pub fn nash_and_welfare_check(&self) -> Result<NashReport, MarketError> {
        self.check_enumerable(NASH_SCAN_LIMIT)?;
        let options: Vec<Action> = std::iter::once(Action::Single)
            .chain(self.acceptors().map(Action::Propose))
            .collect();
        let mut profile = vec![Action::Single; self.n()];
        let mut digits = vec![0usize; self.n()];
        let mut nash_profiles = Vec::new();
        loop {
            for (slot, &d) in profile.iter_mut().zip(&digits) {
                *slot = options[d];
            }
            if self.is_nash(&profile) {
                nash_profiles.push(profile.clone());
            }
            // odometer increment
            let mut k = 0;
            while k < digits.len() {
                digits[k] += 1;
                if digits[k] < options.len() {
                    break;
                }
                digits[k] = 0;
                k += 1;
            }
            if k == digits.len() {
                break;
            }
        }

        let all_nash_stable = nash_profiles.iter().all(|a| self.is_stable(&self.resolve_match(a)));
        let posm_profile = self.gale_shapley().proposal_profile();
        let max_nash_welfare = nash_profiles
            .iter()
            .map(|a| self.welfare(a))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(NashReport {
            all_nash_stable,
            posm_profile_is_nash: self.is_nash(&posm_profile),
            posm_welfare: self.welfare(&posm_profile),
            max_nash_welfare,
            nash_profiles,
        })
    }
}
