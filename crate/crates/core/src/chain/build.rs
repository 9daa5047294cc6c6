use rayon::prelude::*;

use super::{ChainError, JointState, StateSpace};
use crate::market::{Action, Market};
use crate::rule::{action_distribution, update_distribution, RuleParams, SelectionEvent};

/// Sparse row-stochastic transition matrix of the learning dynamics at a
/// fixed experimentation rate.
#[derive(Debug, Clone)]
pub struct PerturbedChain {
    market: Market,
    params: RuleParams,
    space: StateSpace,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Exact one-step distribution out of `state`, as `(target index, prob)`
/// pairs sorted by index.
pub fn transition_row(
    market: &Market,
    space: &StateSpace,
    params: &RuleParams,
    state: &JointState,
) -> Result<Vec<(usize, f64)>, ChainError> {
    let n = market.n();
    let dists = state
        .0
        .iter()
        .map(|s| action_distribution(s, params, market.m()))
        .collect::<Result<Vec<_>, _>>()?;

    let mut acc: Vec<(usize, f64)> = Vec::new();
    let mut choice = vec![0usize; n];
    let mut events = vec![SelectionEvent::baseline(Action::Single); n];
    let mut profile = vec![Action::Single; n];
    loop {
        let mut p_events = 1.0;
        for i in 0..n {
            let (e, q) = dists[i][choice[i]];
            events[i] = e;
            profile[i] = e.action;
            p_events *= q;
        }
        let outcome = market.resolve_match(&profile);

        // per proposer: (index contribution, probability) of each next state
        let mut branches: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for (i, s) in state.0.iter().enumerate() {
            let u = market.utility(crate::market::ProposerId(i), &outcome);
            let update = update_distribution(s, events[i], u, params)?;
            let opts = update
                .outcomes()
                .map(|(next, q)| {
                    let local = space
                        .local_index(i, &next)
                        .expect("updates stay inside the admissible state set");
                    (local * space.stride(i), q)
                })
                .collect();
            branches.push(opts);
        }
        let mut pick = vec![0usize; n];
        loop {
            let mut idx = 0;
            let mut p = p_events;
            for i in 0..n {
                let (contrib, q) = branches[i][pick[i]];
                idx += contrib;
                p *= q;
            }
            acc.push((idx, p));
            if !advance(&mut pick, |i| branches[i].len()) {
                break;
            }
        }

        if !advance(&mut choice, |i| dists[i].len()) {
            break;
        }
    }

    acc.sort_by_key(|&(k, _)| k);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(acc.len());
    for (k, p) in acc {
        match merged.last_mut() {
            Some((last, q)) if *last == k => *q += p,
            _ => merged.push((k, p)),
        }
    }
    Ok(merged)
}

/// Odometer step; false once every digit has wrapped.
fn advance(digits: &mut [usize], base: impl Fn(usize) -> usize) -> bool {
    for (i, d) in digits.iter_mut().enumerate() {
        *d += 1;
        if *d < base(i) {
            return true;
        }
        *d = 0;
    }
    false
}

/// Builds the full transition matrix for `market` under `params`.
pub fn build_chain(market: &Market, params: &RuleParams) -> Result<PerturbedChain, ChainError> {
    let space = StateSpace::new(market)?;
    let rows = (0..space.len())
        .into_par_iter()
        .map(|k| transition_row(market, &space, params, &space.state(k)))
        .collect::<Result<Vec<_>, _>>()?;

    let nnz = rows.iter().map(Vec::len).sum();
    let mut row_ptr = Vec::with_capacity(space.len() + 1);
    let mut cols = Vec::with_capacity(nnz);
    let mut vals = Vec::with_capacity(nnz);
    row_ptr.push(0);
    for row in rows {
        for (c, v) in row {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(PerturbedChain {
        market: market.clone(),
        params: *params,
        space,
        row_ptr,
        cols,
        vals,
    })
}

impl PerturbedChain {
    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.params.epsilon()
    }

    pub fn params(&self) -> &RuleParams {
        &self.params
    }

    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn state(&self, k: usize) -> JointState {
        self.space.state(k)
    }

    /// Column indices and probabilities of row `k`.
    pub fn row(&self, k: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[k], self.row_ptr[k + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn probability(&self, from: usize, to: usize) -> f64 {
        let (cols, vals) = self.row(from);
        cols.binary_search(&to).map_or(0.0, |p| vals[p])
    }

    /// Largest deviation of a row sum from 1.
    pub fn max_row_error(&self) -> f64 {
        (0..self.len())
            .map(|k| (self.row(k).1.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.vals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `pi * T`.
    pub fn left_multiply(&self, pi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (k, &w) in pi.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(k);
            for (&c, &v) in cols.iter().zip(vals) {
                out[c] += w * v;
            }
        }
        out
    }

    /// `(row, col, prob)` for every stored entry.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.len()).flat_map(move |k| {
            let (cols, vals) = self.row(k);
            cols.iter().zip(vals).map(move |(&c, &v)| (k, c, v))
        })
    }
}
