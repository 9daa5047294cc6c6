//! Stationary distributions.
//!
//! The chain over the full enumerated state space usually contains
//! transient states (combinations the dynamics can never return to), so
//! irreducibility is checked on the positive-probability graph: there must
//! be exactly one closed communicating class. The stationary distribution
//! is supported on that class and solved there, either directly with the
//! Grassmann-Taksar-Heyman elimination or by power iteration.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use super::{ChainError, PerturbedChain};

/// Classes at or below this size are solved directly.
pub const DIRECT_SOLVE_LIMIT: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Solver {
    /// Direct below [`DIRECT_SOLVE_LIMIT`] states, power iteration above.
    Auto,
    Direct,
    Power {
        max_iterations: usize,
        tolerance: f64,
    },
}

impl Solver {
    pub const DEFAULT_POWER: Solver = Solver::Power {
        max_iterations: 200_000,
        tolerance: 1e-12,
    };
}

#[derive(Debug, Clone, Serialize)]
pub struct Stationary {
    /// One entry per chain state; zero off the recurrent class.
    pub pi: Vec<f64>,
    /// `max |pi T - pi|` over the whole chain.
    pub residual: f64,
    /// Indices of the closed class, ascending.
    pub support: Vec<usize>,
    pub solver: Solver,
}

impl Stationary {
    /// Index of the most probable state.
    pub fn argmax(&self) -> usize {
        self.pi
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .expect("non-empty chain")
    }
}

/// Closed communicating classes of the positive-probability graph, each
/// sorted ascending.
pub fn closed_classes(chain: &PerturbedChain) -> Vec<Vec<usize>> {
    let mut graph = DiGraph::<(), ()>::with_capacity(chain.len(), chain.nnz());
    let nodes: Vec<_> = (0..chain.len()).map(|_| graph.add_node(())).collect();
    for (r, c, p) in chain.triplets() {
        if p > 0.0 && r != c {
            graph.add_edge(nodes[r], nodes[c], ());
        }
    }
    let sccs = tarjan_scc(&graph);
    let mut component = vec![0usize; chain.len()];
    for (k, scc) in sccs.iter().enumerate() {
        for n in scc {
            component[n.index()] = k;
        }
    }
    let mut closed: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(k, scc)| {
            scc.iter().all(|n| {
                let (cols, vals) = chain.row(n.index());
                cols.iter().zip(vals).all(|(&c, &v)| v == 0.0 || component[c] == *k)
            })
        })
        .map(|(_, scc)| {
            let mut v: Vec<usize> = scc.iter().map(|n| n.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    closed.sort();
    closed
}

pub fn stationary_distribution(chain: &PerturbedChain) -> Result<Stationary, ChainError> {
    stationary_with(chain, Solver::Auto)
}

pub fn stationary_with(chain: &PerturbedChain, solver: Solver) -> Result<Stationary, ChainError> {
    let mut classes = closed_classes(chain);
    if classes.len() != 1 {
        return Err(ChainError::Reducible(classes.len()));
    }
    let support = classes.pop().expect("one class");
    let solver = match solver {
        Solver::Auto if support.len() <= DIRECT_SOLVE_LIMIT => Solver::Direct,
        Solver::Auto => Solver::DEFAULT_POWER,
        s => s,
    };
    let local = match solver {
        Solver::Direct => gth(&dense_block(chain, &support)),
        Solver::Power {
            max_iterations,
            tolerance,
        } => power_iteration(chain, &support, max_iterations, tolerance)?,
        Solver::Auto => unreachable!("resolved above"),
    };
    let mut pi = vec![0.0; chain.len()];
    for (&k, &p) in support.iter().zip(&local) {
        pi[k] = p;
    }
    let residual = residual(chain, &pi);
    Ok(Stationary {
        pi,
        residual,
        support,
        solver,
    })
}

pub(crate) fn residual(chain: &PerturbedChain, pi: &[f64]) -> f64 {
    chain
        .left_multiply(pi)
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn dense_block(chain: &PerturbedChain, support: &[usize]) -> Vec<Vec<f64>> {
    let mut pos = vec![usize::MAX; chain.len()];
    for (local, &k) in support.iter().enumerate() {
        pos[k] = local;
    }
    let mut dense = vec![vec![0.0; support.len()]; support.len()];
    for (local, &k) in support.iter().enumerate() {
        let (cols, vals) = chain.row(k);
        for (&c, &v) in cols.iter().zip(vals) {
            debug_assert!(pos[c] != usize::MAX, "closed class leaks");
            dense[local][pos[c]] = v;
        }
    }
    dense
}

/// Grassmann-Taksar-Heyman elimination for an irreducible stochastic
/// matrix. Subtraction-free, so small transition probabilities keep full
/// relative accuracy.
fn gth(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    let mut a: Vec<Vec<f64>> = p.to_vec();
    for l in (1..n).rev() {
        let s: f64 = a[l][..l].iter().sum();
        for row in a.iter_mut().take(l) {
            row[l] /= s;
        }
        for i in 0..l {
            let factor = a[i][l];
            if factor == 0.0 {
                continue;
            }
            let (head, tail) = a.split_at_mut(l);
            let pivot = &tail[0];
            for (x, &y) in head[i][..l].iter_mut().zip(&pivot[..l]) {
                *x += factor * y;
            }
        }
    }
    let mut x = vec![0.0; n];
    x[0] = 1.0;
    for j in 1..n {
        x[j] = (0..j).map(|i| x[i] * a[i][j]).sum();
    }
    let total: f64 = x.iter().sum();
    x.iter().map(|v| v / total).collect()
}

fn power_iteration(
    chain: &PerturbedChain,
    support: &[usize],
    max_iterations: usize,
    tolerance: f64,
) -> Result<Vec<f64>, ChainError> {
    let mut pi = vec![0.0; chain.len()];
    for &k in support {
        pi[k] = 1.0 / support.len() as f64;
    }
    let mut delta = f64::INFINITY;
    for _ in 0..max_iterations {
        let mut next = chain.left_multiply(&pi);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        delta = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        pi = next;
        if delta <= tolerance {
            return Ok(support.iter().map(|&k| pi[k]).collect());
        }
    }
    Err(ChainError::NotConverged {
        iterations: max_iterations,
        residual: delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gth_two_state_closed_form() {
        // leave 0 w.p. p, leave 1 w.p. q: pi_0 = q / (p + q)
        let (p, q) = (0.3, 0.05);
        let pi = gth(&[vec![1.0 - p, p], vec![q, 1.0 - q]]);
        assert!((pi[0] - q / (p + q)).abs() < 1e-12);
        assert!((pi[1] - p / (p + q)).abs() < 1e-12);
    }

    #[test]
    fn gth_birth_death_chain() {
        // reflecting walk with up prob a, down prob b: pi_k proportional to (a/b)^k
        let (a, b) = (0.2, 0.5);
        let n = 6;
        let mut p = vec![vec![0.0; n]; n];
        for k in 0..n {
            if k + 1 < n {
                p[k][k + 1] = a;
            }
            if k > 0 {
                p[k][k - 1] = b;
            }
            p[k][k] = 1.0 - p[k].iter().sum::<f64>();
        }
        let pi = gth(&p);
        let weights: Vec<f64> = (0..n).map(|k| (a / b).powi(k as i32)).collect();
        let z: f64 = weights.iter().sum();
        for k in 0..n {
            assert!((pi[k] - weights[k] / z).abs() < 1e-12);
        }
    }
}
