//! Small reference markets used throughout the tests and the CLI.

use crate::market::Market;

/// Two proposers who both prefer `A1`; `A1` prefers `P2`, `A2` prefers `P1`.
/// Unique stable match `(P1,A2) (P2,A1)`.
pub fn m2() -> Market {
    Market::from_rankings(&[vec![0, 1], vec![0, 1]], &[vec![1, 0], vec![0, 1]]).expect("valid fixture")
}

/// Crossed preferences with two stable matches. The proposer-optimal one
/// is `(P1,A1) (P2,A2)`.
pub fn m2b() -> Market {
    Market::from_rankings(&[vec![0, 1], vec![1, 0]], &[vec![1, 0], vec![0, 1]]).expect("valid fixture")
}

/// `n x n` market where `P_i` and `A_i` are each other's favourite; the
/// remaining ranks are cyclic shifts.
pub fn aligned(n: usize) -> Market {
    let cyclic = |start: usize| (0..n).map(|k| (start + k) % n).collect::<Vec<_>>();
    let rankings: Vec<Vec<usize>> = (0..n).map(cyclic).collect();
    Market::from_rankings(&rankings, &rankings).expect("valid fixture")
}

/// Looks up a fixture by name (`m2`, `m2b`, `mal`).
pub fn by_name(name: &str) -> Option<Market> {
    match name.to_ascii_lowercase().as_str() {
        "m2" => Some(m2()),
        "m2b" => Some(m2b()),
        "mal" => Some(aligned(3)),
        _ => None,
    }
}
