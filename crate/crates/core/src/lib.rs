//! Decentralized two-sided matching markets in which proposers learn their
//! own preferences through a completely uncoupled trial-and-error rule.
//!
//! * [`market`]: the static market, stability oracles and best responses.
//! * [`rule`]: the per-proposer mood/baseline state machine.
//! * [`sim`]: the repeated game and its convergence metrics.
//! * [`chain`]: exact analysis of the induced perturbed Markov chain.

pub mod chain;
pub mod fixtures;
pub mod generate;
pub mod market;
pub mod rule;
pub mod sim;

pub use market::{AcceptorId, Action, Market, MarketError, MatchOutcome, ProposerId};
pub use rule::{Mood, ProposerState, RuleParams};
