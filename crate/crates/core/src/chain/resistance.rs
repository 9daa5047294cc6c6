//! Resistance scaling of elementary transitions.
//!
//! A transition whose probability behaves like `eps^r` has resistance `r`.
//! The elementary transitions out of aligned states are built from the
//! market by applying one experiment (or two for the double-experiment
//! path) and the exact probabilities are fitted on a log-log grid.

use serde::Serialize;

use super::{is_aligned, transition_row, ChainError, JointState, StateSpace};
use crate::market::{Action, Market, ProposerId};
use crate::rule::{update_distribution, Mood, ProposerState, RuleParams, SelectionEvent, StateUpdate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResistanceKind {
    /// Content proposer experiments, gains `du`, and adopts.
    ContentAdopt,
    /// Discontent proposer experiments, earns `u > 0`, and adopts.
    DiscontentAdopt,
    /// Matched content proposer experiments with staying single.
    ContentRemainSingle,
    /// The same content proposer experiments twice in a row, displacing a
    /// content rival who turns watchful and then discontent.
    DoubleExperiment,
}

impl ResistanceKind {
    pub const ALL: [ResistanceKind; 4] = [
        ResistanceKind::ContentAdopt,
        ResistanceKind::DiscontentAdopt,
        ResistanceKind::ContentRemainSingle,
        ResistanceKind::DoubleExperiment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ResistanceKind::ContentAdopt => "content_adopt",
            ResistanceKind::DiscontentAdopt => "discontent_adopt",
            ResistanceKind::ContentRemainSingle => "content_remain_single",
            ResistanceKind::DoubleExperiment => "double_experiment",
        }
    }
}

/// `argument` is the utility gain for content adoption and the realized
/// utility for discontent adoption; it is ignored otherwise.
pub fn theoretical_resistance(kind: ResistanceKind, argument: f64, params: &RuleParams) -> f64 {
    match kind {
        ResistanceKind::ContentAdopt => 1.0 + params.g().eval(argument),
        ResistanceKind::DiscontentAdopt => 1.5 + params.f().eval(argument),
        ResistanceKind::ContentRemainSingle | ResistanceKind::DoubleExperiment => 2.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElementaryTransition {
    pub kind: ResistanceKind,
    pub proposer: ProposerId,
    pub action: Action,
    pub argument: f64,
    pub source: JointState,
    /// States visited after the source; the last one is the target.
    pub path: Vec<JointState>,
}

impl ElementaryTransition {
    pub fn target(&self) -> &JointState {
        self.path.last().expect("non-empty path")
    }

    pub fn theory(&self, params: &RuleParams) -> f64 {
        theoretical_resistance(self.kind, self.argument, params)
    }
}

/// One step in which `deviator` plays `event` and everyone else repeats
/// their baseline. `None` unless every non-deviator update is certain.
fn step_with(
    market: &Market,
    params: &RuleParams,
    states: &[ProposerState],
    deviator: usize,
    event: SelectionEvent,
) -> Option<(f64, StateUpdate, Vec<ProposerState>)> {
    let mut profile: Vec<Action> = states.iter().map(|s| s.baseline).collect();
    profile[deviator] = event.action;
    let outcome = market.resolve_match(&profile);
    let mut next = states.to_vec();
    let mut own = None;
    for (i, s) in states.iter().enumerate() {
        let u = market.utility(ProposerId(i), &outcome);
        if i == deviator {
            let upd = update_distribution(s, event, u, params).ok()?;
            own = Some((u, upd));
            continue;
        }
        match update_distribution(s, SelectionEvent::baseline(s.baseline), u, params).ok()? {
            StateUpdate::Certain(t) => next[i] = t,
            StateUpdate::Coin { .. } => return None,
        }
    }
    let (u, upd) = own?;
    Some((u, upd, next))
}

fn with_own(mut states: Vec<ProposerState>, i: usize, own: ProposerState) -> JointState {
    states[i] = own;
    JointState(states)
}

/// Every elementary transition out of every aligned state of `market`.
pub fn elementary_transitions(market: &Market, params: &RuleParams) -> Result<Vec<ElementaryTransition>, ChainError> {
    let space = StateSpace::new(market)?;
    let mut out = Vec::new();
    for k in 0..space.len() {
        let source = space.state(k);
        if !is_aligned(market, &source) {
            continue;
        }
        for i in 0..market.n() {
            let s = source.0[i];
            let actions = market
                .acceptors()
                .map(Action::Propose)
                .chain(std::iter::once(Action::Single))
                .filter(|&a| a != s.baseline);
            for a in actions {
                let event = SelectionEvent::experiment(a);
                let Some((u, upd, rest)) = step_with(market, params, &source.0, i, event) else {
                    continue;
                };
                let push = |out: &mut Vec<ElementaryTransition>, kind, argument, path| {
                    out.push(ElementaryTransition {
                        kind,
                        proposer: ProposerId(i),
                        action: a,
                        argument,
                        source: source.clone(),
                        path,
                    })
                };
                match (s.mood, upd) {
                    (Mood::Content, StateUpdate::Coin { adopt, .. }) => {
                        let gain = u - s.baseline_utility;
                        push(
                            &mut out,
                            ResistanceKind::ContentAdopt,
                            gain,
                            vec![with_own(rest, i, adopt)],
                        );
                    }
                    (Mood::Discontent, StateUpdate::Coin { adopt, .. }) if a != Action::Single && u > 0.0 => {
                        push(
                            &mut out,
                            ResistanceKind::DiscontentAdopt,
                            u,
                            vec![with_own(rest, i, adopt)],
                        );
                    }
                    (Mood::Content, StateUpdate::Certain(own)) if a == Action::Single && s.baseline_utility > 0.0 => {
                        let target = with_own(rest, i, own);
                        // a rejected proposal can land on the same state at resistance 1
                        let shadowed = market.acceptors().map(Action::Propose).any(|b| {
                            matches!(
                                step_with(market, params, &source.0, i, SelectionEvent::experiment(b)),
                                Some((_, StateUpdate::Certain(o), r)) if with_own(r.clone(), i, o) == target
                            )
                        });
                        if target != source && !shadowed {
                            push(&mut out, ResistanceKind::ContentRemainSingle, 0.0, vec![target]);
                        }
                    }
                    (Mood::Content, StateUpdate::Certain(own)) if a != Action::Single => {
                        let mid = with_own(rest, i, own);
                        if !mid.has_watchful() {
                            continue;
                        }
                        let Some((_, StateUpdate::Certain(own2), rest2)) = step_with(market, params, &mid.0, i, event)
                        else {
                            continue;
                        };
                        let last = with_own(rest2, i, own2);
                        let ousted = (0..market.n())
                            .any(|k| k != i && source.0[k].mood == Mood::Content && last.0[k].mood == Mood::Discontent);
                        if ousted {
                            push(&mut out, ResistanceKind::DoubleExperiment, 0.0, vec![mid, last]);
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(out)
}

/// Exact probability of reaching the transition's target from its source
/// in `path.len()` steps at the given parameters.
pub fn transition_probability(
    market: &Market,
    params: &RuleParams,
    transition: &ElementaryTransition,
) -> Result<f64, ChainError> {
    let space = StateSpace::new(market)?;
    let src = space.index_of(&transition.source.0).expect("source in state space");
    let dst = space.index_of(&transition.target().0).expect("target in state space");
    let mut dist = vec![(src, 1.0)];
    for _ in 0..transition.path.len() {
        let mut next: Vec<(usize, f64)> = Vec::new();
        for &(k, w) in &dist {
            let row = transition_row(market, &space, params, &space.state(k))?;
            next.extend(row.into_iter().map(|(c, p)| (c, w * p)));
        }
        next.sort_by_key(|&(c, _)| c);
        dist.clear();
        for (c, p) in next {
            match dist.last_mut() {
                Some((last, q)) if *last == c => *q += p,
                _ => dist.push((c, p)),
            }
        }
    }
    Ok(dist.iter().find(|(c, _)| *c == dst).map_or(0.0, |&(_, p)| p))
}

/// Least-squares slope of `ln p` against `ln eps`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<f64, ChainError> {
    if points.len() < 4 {
        return Err(ChainError::GridTooSmall(points.len()));
    }
    if let Some(&(eps, _)) = points.iter().find(|(_, p)| *p <= 0.0) {
        return Err(ChainError::ZeroProbability(eps));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(e, _)| e.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, p)| p.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub kind: ResistanceKind,
    pub argument: f64,
    pub theory: f64,
    pub slope: f64,
    pub abs_error: f64,
}

impl SlopeFit {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.abs_error <= tolerance
    }
}

/// Fits the resistance of `transition` over `grid`, holding every other
/// rule parameter at `params`.
pub fn resistance_slope(
    market: &Market,
    params: &RuleParams,
    transition: &ElementaryTransition,
    grid: &[f64],
) -> Result<SlopeFit, ChainError> {
    let points = grid
        .iter()
        .map(|&eps| {
            let p = params.with_epsilon(eps)?;
            Ok((eps, transition_probability(market, &p, transition)?))
        })
        .collect::<Result<Vec<_>, ChainError>>()?;
    let slope = fit_slope(&points)?;
    let theory = transition.theory(params);
    Ok(SlopeFit {
        kind: transition.kind,
        argument: transition.argument,
        theory,
        slope,
        abs_error: (slope - theory).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::market::AcceptorId;

    const GRID: [f64; 4] = [0.1, 0.05, 0.02, 0.01];

    #[test]
    fn theory_values() {
        let p = RuleParams::new(0.1).unwrap();
        assert!((theoretical_resistance(ResistanceKind::ContentAdopt, 0.5, &p) - 1.235).abs() < 1e-12);
        assert!((theoretical_resistance(ResistanceKind::DiscontentAdopt, 0.5, &p) - 1.735).abs() < 1e-12);
        assert_eq!(
            theoretical_resistance(ResistanceKind::ContentRemainSingle, 0.3, &p),
            2.0
        );
        assert_eq!(theoretical_resistance(ResistanceKind::DoubleExperiment, 0.0, &p), 2.0);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = GRID.iter().map(|&e| (e, 3.0 * e.powf(1.7))).collect();
        assert!((fit_slope(&pts).unwrap() - 1.7).abs() < 1e-12);
        assert!(matches!(fit_slope(&pts[..3]), Err(ChainError::GridTooSmall(3))));
        let zero = [(0.1, 0.0), (0.05, 1.0), (0.02, 1.0), (0.01, 1.0)];
        assert!(matches!(fit_slope(&zero), Err(ChainError::ZeroProbability(e)) if e == 0.1));
    }

    #[test]
    fn m2_has_every_kind() {
        let m2 = fixtures::m2();
        let params = RuleParams::new(0.1).unwrap();
        let ts = elementary_transitions(&m2, &params).unwrap();
        for kind in ResistanceKind::ALL {
            assert!(ts.iter().any(|t| t.kind == kind), "{kind:?}");
        }
    }

    #[test]
    fn content_adopt_half_gain_on_m2() {
        // P1 single, P2 on A1: P1 tries A2 and gains 0.5
        let m2 = fixtures::m2();
        let params = RuleParams::new(0.1).unwrap();
        let ts = elementary_transitions(&m2, &params).unwrap();
        let t = ts
            .iter()
            .find(|t| {
                t.kind == ResistanceKind::ContentAdopt
                    && t.source.0
                        == [
                            ProposerState::content(Action::Single, 0.0),
                            ProposerState::content(Action::Propose(AcceptorId(0)), 1.0),
                        ]
            })
            .unwrap();
        assert_eq!(t.argument, 0.5);
        let fit = resistance_slope(&m2, &params, t, &GRID).unwrap();
        assert!(fit.abs_error <= 0.1, "{fit:?}");
    }

    #[test]
    fn z_self_loop_has_zero_resistance() {
        let m2 = fixtures::m2();
        let params = RuleParams::new(0.1).unwrap();
        let e = JointState(vec![
            ProposerState::content(Action::Propose(AcceptorId(1)), 0.5),
            ProposerState::content(Action::Propose(AcceptorId(0)), 1.0),
        ]);
        let t = ElementaryTransition {
            kind: ResistanceKind::ContentAdopt,
            proposer: ProposerId(0),
            action: Action::Single,
            argument: 0.0,
            source: e.clone(),
            path: vec![e],
        };
        let pts: Vec<(f64, f64)> = GRID
            .iter()
            .map(|&eps| {
                (
                    eps,
                    transition_probability(&m2, &params.with_epsilon(eps).unwrap(), &t).unwrap(),
                )
            })
            .collect();
        assert!(fit_slope(&pts).unwrap().abs() < 0.1);
    }
}
