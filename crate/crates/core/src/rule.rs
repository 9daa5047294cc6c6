//! The per-proposer trial-and-error rule.
//!
//! Each proposer carries a mood (content, discontent or watchful), a
//! baseline action and a baseline utility. Action selection and the state
//! update read nothing but the proposer's own state, own realized utility
//! and the size of its own action set.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{AcceptorId, Action};

#[derive(Debug, Error, PartialEq)]
pub enum RuleError {
    #[error("experimentation rate {0} is invalid: need epsilon > 0 and 1 - epsilon - epsilon^2 > 0")]
    InvalidEpsilon(f64),
    #[error("acceptance function {0} must be strictly decreasing with values in [0, 0.5) on [0, 1]")]
    InvalidAcceptanceFn(AffineDecay),
    #[error("a watchful proposer cannot experiment")]
    InvalidTransition,
    #[error("the acceptor set is empty")]
    EmptyActionSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mood {
    Content,
    Discontent,
    Watchful,
}

impl Mood {
    pub fn letter(self) -> char {
        match self {
            Mood::Content => 'C',
            Mood::Discontent => 'D',
            Mood::Watchful => 'W',
        }
    }
}

/// `(mood, baseline action, baseline utility)`.
///
/// A discontent proposer always has baseline `(Single, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposerState {
    pub mood: Mood,
    pub baseline: Action,
    pub baseline_utility: f64,
}

impl ProposerState {
    pub fn discontent() -> Self {
        ProposerState {
            mood: Mood::Discontent,
            baseline: Action::Single,
            baseline_utility: 0.0,
        }
    }

    pub fn content(baseline: Action, baseline_utility: f64) -> Self {
        ProposerState {
            mood: Mood::Content,
            baseline,
            baseline_utility,
        }
    }

    pub fn watchful(baseline: Action, baseline_utility: f64) -> Self {
        ProposerState {
            mood: Mood::Watchful,
            baseline,
            baseline_utility,
        }
    }

    /// Discontent invariant and utility range.
    pub fn is_valid(&self) -> bool {
        let in_range = (0.0..=1.0).contains(&self.baseline_utility);
        match self.mood {
            Mood::Discontent => self.baseline == Action::Single && self.baseline_utility == 0.0,
            _ => in_range,
        }
    }
}

impl fmt::Display for ProposerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let action = match self.baseline {
            Action::Propose(j) => format!("A{}", j.0 + 1),
            Action::Single => "-".to_string(),
        };
        write!(f, "({},{},{})", self.mood.letter(), action, self.baseline_utility)
    }
}

/// `x -> intercept - slope * x` on `[0, 1]`, used for the acceptance
/// exponents of adoption coins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineDecay {
    pub intercept: f64,
    pub slope: f64,
}

impl AffineDecay {
    pub const DEFAULT: AffineDecay = AffineDecay {
        intercept: 0.46,
        slope: 0.45,
    };

    pub fn eval(&self, x: f64) -> f64 {
        self.intercept - self.slope * x
    }

    pub fn validate(&self) -> Result<(), RuleError> {
        let ok = self.slope > 0.0
            && self.intercept < 0.5
            && self.intercept - self.slope >= 0.0
            && self.intercept.is_finite()
            && self.slope.is_finite();
        if ok {
            Ok(())
        } else {
            Err(RuleError::InvalidAcceptanceFn(*self))
        }
    }
}

impl fmt::Display for AffineDecay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} - {}x", self.intercept, self.slope)
    }
}

/// Default acceptance functions `F(x) = G(x) = 0.46 - 0.45x`.
pub fn default_f_g() -> (AffineDecay, AffineDecay) {
    (AffineDecay::DEFAULT, AffineDecay::DEFAULT)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleParamsConfig {
    epsilon: f64,
    #[serde(default = "default_decay")]
    f: AffineDecay,
    #[serde(default = "default_decay")]
    g: AffineDecay,
    #[serde(default)]
    revert_keeps_baseline_utility: bool,
    #[serde(default = "yes")]
    exclude_baseline_from_experiments: bool,
}

fn default_decay() -> AffineDecay {
    AffineDecay::DEFAULT
}

fn yes() -> bool {
    true
}

/// Experimentation rate, acceptance functions and rule variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RuleParamsConfig", into = "RuleParamsConfig")]
pub struct RuleParams {
    epsilon: f64,
    f: AffineDecay,
    g: AffineDecay,
    revert_keeps_baseline_utility: bool,
    exclude_baseline_from_experiments: bool,
}

impl TryFrom<RuleParamsConfig> for RuleParams {
    type Error = RuleError;

    fn try_from(c: RuleParamsConfig) -> Result<Self, RuleError> {
        Ok(RuleParams::new(c.epsilon)?
            .with_f(c.f)?
            .with_g(c.g)?
            .with_revert_keeps_baseline_utility(c.revert_keeps_baseline_utility)
            .with_exclude_baseline_from_experiments(c.exclude_baseline_from_experiments))
    }
}

impl From<RuleParams> for RuleParamsConfig {
    fn from(p: RuleParams) -> Self {
        RuleParamsConfig {
            epsilon: p.epsilon,
            f: p.f,
            g: p.g,
            revert_keeps_baseline_utility: p.revert_keeps_baseline_utility,
            exclude_baseline_from_experiments: p.exclude_baseline_from_experiments,
        }
    }
}

fn epsilon_ok(eps: f64) -> bool {
    eps.is_finite() && eps >= 0.0 && 1.0 - eps - eps * eps > 0.0
}

impl RuleParams {
    /// Default rule at experimentation rate `epsilon`.
    pub fn new(epsilon: f64) -> Result<Self, RuleError> {
        if !(epsilon > 0.0 && epsilon_ok(epsilon)) {
            return Err(RuleError::InvalidEpsilon(epsilon));
        }
        Ok(RuleParams {
            epsilon,
            f: AffineDecay::DEFAULT,
            g: AffineDecay::DEFAULT,
            revert_keeps_baseline_utility: false,
            exclude_baseline_from_experiments: true,
        })
    }

    /// The unperturbed limit: every experiment branch has probability 0.
    pub fn unperturbed() -> Self {
        RuleParams {
            epsilon: 0.0,
            ..RuleParams::new(0.1).expect("valid")
        }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Result<Self, RuleError> {
        Ok(RuleParams {
            epsilon: RuleParams::new(epsilon)?.epsilon,
            ..self
        })
    }

    pub fn with_f(self, f: AffineDecay) -> Result<Self, RuleError> {
        f.validate()?;
        Ok(RuleParams { f, ..self })
    }

    pub fn with_g(self, g: AffineDecay) -> Result<Self, RuleError> {
        g.validate()?;
        Ok(RuleParams { g, ..self })
    }

    /// A failed content experiment keeps the old baseline utility instead
    /// of recording the experimental one.
    pub fn with_revert_keeps_baseline_utility(self, on: bool) -> Self {
        RuleParams {
            revert_keeps_baseline_utility: on,
            ..self
        }
    }

    /// Content experiments draw from the acceptors other than the current
    /// baseline (on by default).
    pub fn with_exclude_baseline_from_experiments(self, on: bool) -> Self {
        RuleParams {
            exclude_baseline_from_experiments: on,
            ..self
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn f(&self) -> AffineDecay {
        self.f
    }

    pub fn g(&self) -> AffineDecay {
        self.g
    }

    pub fn revert_keeps_baseline_utility(&self) -> bool {
        self.revert_keeps_baseline_utility
    }

    pub fn exclude_baseline_from_experiments(&self) -> bool {
        self.exclude_baseline_from_experiments
    }

    fn check(&self) -> Result<(), RuleError> {
        if epsilon_ok(self.epsilon) {
            Ok(())
        } else {
            Err(RuleError::InvalidEpsilon(self.epsilon))
        }
    }

    /// Probability that a content proposer adopts an experiment that
    /// raised its utility by `gain`.
    pub fn content_adoption(&self, gain: f64) -> f64 {
        self.epsilon.powf(self.g.eval(gain.clamp(0.0, 1.0)))
    }

    /// Probability that a discontent proposer adopts an experiment that
    /// yielded `utility`.
    pub fn discontent_adoption(&self, utility: f64) -> f64 {
        self.epsilon.powf(self.f.eval(utility.clamp(0.0, 1.0)))
    }

    /// Acceptors a content proposer may experiment with.
    fn experiment_set(&self, baseline: Action, m: usize) -> impl Iterator<Item = AcceptorId> {
        let skip = if self.exclude_baseline_from_experiments {
            baseline.target()
        } else {
            None
        };
        (0..m).map(AcceptorId).filter(move |&j| Some(j) != skip)
    }
}

/// The action a proposer plays and whether it was an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SelectionEvent {
    pub action: Action,
    pub experimented: bool,
}

impl SelectionEvent {
    pub fn baseline(action: Action) -> Self {
        SelectionEvent {
            action,
            experimented: false,
        }
    }

    pub fn experiment(action: Action) -> Self {
        SelectionEvent {
            action,
            experimented: true,
        }
    }
}

/// Exact action-selection law for a proposer with `m` acceptors available.
/// Zero-probability events are omitted.
pub fn action_distribution(
    state: &ProposerState,
    params: &RuleParams,
    m: usize,
) -> Result<Vec<(SelectionEvent, f64)>, RuleError> {
    params.check()?;
    if m == 0 {
        return Err(RuleError::EmptyActionSet);
    }
    let eps = params.epsilon;
    let mut out = Vec::with_capacity(m + 2);
    match state.mood {
        Mood::Content => {
            let set: Vec<AcceptorId> = params.experiment_set(state.baseline, m).collect();
            if set.is_empty() {
                // nothing new to try: the acceptor mass stays on the baseline
                out.push((SelectionEvent::baseline(state.baseline), 1.0 - eps * eps));
            } else {
                out.push((SelectionEvent::baseline(state.baseline), 1.0 - eps - eps * eps));
                let share = eps / set.len() as f64;
                out.extend(
                    set.into_iter()
                        .map(|j| (SelectionEvent::experiment(Action::Propose(j)), share)),
                );
            }
            out.push((SelectionEvent::experiment(Action::Single), eps * eps));
        }
        Mood::Discontent => {
            let explore = eps.powf(1.5);
            out.push((SelectionEvent::baseline(Action::Single), 1.0 - explore));
            let share = explore / m as f64;
            out.extend((0..m).map(|j| (SelectionEvent::experiment(Action::Propose(AcceptorId(j))), share)));
        }
        Mood::Watchful => out.push((SelectionEvent::baseline(state.baseline), 1.0)),
    }
    out.retain(|(_, p)| *p > 0.0);
    Ok(out)
}

/// Samples one event from [`action_distribution`].
pub fn select_action<R: Rng + ?Sized>(
    state: &ProposerState,
    params: &RuleParams,
    m: usize,
    rng: &mut R,
) -> Result<SelectionEvent, RuleError> {
    params.check()?;
    if m == 0 {
        return Err(RuleError::EmptyActionSet);
    }
    let eps = params.epsilon;
    match state.mood {
        Mood::Watchful => Ok(SelectionEvent::baseline(state.baseline)),
        Mood::Discontent => {
            if rng.gen::<f64>() < eps.powf(1.5) {
                let j = AcceptorId(rng.gen_range(0..m));
                Ok(SelectionEvent::experiment(Action::Propose(j)))
            } else {
                Ok(SelectionEvent::baseline(Action::Single))
            }
        }
        Mood::Content => {
            let skip = match (params.exclude_baseline_from_experiments, state.baseline) {
                (true, Action::Propose(j)) => Some(j.0),
                _ => None,
            };
            let k = m - usize::from(skip.is_some());
            let explore = if k == 0 { 0.0 } else { eps };
            let u = rng.gen::<f64>();
            if u < eps * eps {
                Ok(SelectionEvent::experiment(Action::Single))
            } else if u < eps * eps + explore {
                let mut j = rng.gen_range(0..k);
                if skip.is_some_and(|s| j >= s) {
                    j += 1;
                }
                Ok(SelectionEvent::experiment(Action::Propose(AcceptorId(j))))
            } else {
                Ok(SelectionEvent::baseline(state.baseline))
            }
        }
    }
}

/// Result of one state update: either certain or a biased coin between
/// adopting the played action and keeping the old state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateUpdate {
    Certain(ProposerState),
    Coin {
        adopt: ProposerState,
        keep: ProposerState,
        p_adopt: f64,
    },
}

impl StateUpdate {
    pub fn outcomes(&self) -> impl Iterator<Item = (ProposerState, f64)> {
        let pair = match *self {
            StateUpdate::Certain(s) => [(s, 1.0), (s, 0.0)],
            StateUpdate::Coin { adopt, keep, p_adopt } => [(adopt, p_adopt), (keep, 1.0 - p_adopt)],
        };
        pair.into_iter().filter(|(_, p)| *p > 0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ProposerState {
        match *self {
            StateUpdate::Certain(s) => s,
            StateUpdate::Coin { adopt, keep, p_adopt } => {
                if rng.gen::<f64>() < p_adopt {
                    adopt
                } else {
                    keep
                }
            }
        }
    }
}

/// Exact state-update law after playing `event` and receiving `utility`.
pub fn update_distribution(
    state: &ProposerState,
    event: SelectionEvent,
    utility: f64,
    params: &RuleParams,
) -> Result<StateUpdate, RuleError> {
    let base = state.baseline;
    let base_u = state.baseline_utility;
    let update = match (state.mood, event.experimented) {
        (Mood::Content, false) => {
            if utility >= base_u {
                StateUpdate::Certain(ProposerState::content(base, utility))
            } else {
                StateUpdate::Certain(ProposerState::watchful(base, base_u))
            }
        }
        (Mood::Content, true) => {
            if utility <= base_u {
                let kept = if params.revert_keeps_baseline_utility {
                    base_u
                } else {
                    utility
                };
                StateUpdate::Certain(ProposerState::content(base, kept))
            } else {
                StateUpdate::Coin {
                    adopt: ProposerState::content(event.action, utility),
                    keep: *state,
                    p_adopt: params.content_adoption(utility - base_u),
                }
            }
        }
        (Mood::Discontent, true) => StateUpdate::Coin {
            adopt: ProposerState::content(event.action, utility),
            keep: ProposerState::discontent(),
            p_adopt: params.discontent_adoption(utility),
        },
        // playing the (Single, 0) baseline reveals nothing new
        (Mood::Discontent, false) => StateUpdate::Certain(*state),
        (Mood::Watchful, true) => return Err(RuleError::InvalidTransition),
        (Mood::Watchful, false) => {
            if utility >= base_u {
                StateUpdate::Certain(ProposerState::content(base, base_u))
            } else {
                StateUpdate::Certain(ProposerState::discontent())
            }
        }
    };
    Ok(update)
}

/// Samples the next state. Consumes one uniform draw only when the update
/// involves an adoption coin.
pub fn update_state<R: Rng + ?Sized>(
    state: &ProposerState,
    event: SelectionEvent,
    utility: f64,
    params: &RuleParams,
    rng: &mut R,
) -> Result<ProposerState, RuleError> {
    Ok(update_distribution(state, event, utility, params)?.sample(rng))
}
