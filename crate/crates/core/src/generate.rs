//! Seeded random market generation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::market::{Market, MarketError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cardinalization {
    /// Uniformly random strict orders, valued by rank.
    #[default]
    Rank,
    /// Independent uniform values in `(0, 1]`, redrawn on collision.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketGenSpec {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: Cardinalization,
}

impl MarketGenSpec {
    pub fn new(n: usize, m: usize, seed: u64) -> Self {
        MarketGenSpec {
            n,
            m,
            seed,
            mode: Cardinalization::Rank,
        }
    }

    pub fn generate(&self) -> Result<Market, MarketError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        match self.mode {
            Cardinalization::Rank => {
                let pr = random_orders(&mut rng, self.n, self.m);
                let ar = random_orders(&mut rng, self.m, self.n);
                Market::from_rankings(&pr, &ar)
            }
            Cardinalization::Uniform => {
                let pv = random_values(&mut rng, self.n, self.m);
                let av = random_values(&mut rng, self.m, self.n);
                let names = |p: &str, k: usize| (1..=k).map(|i| format!("{p}{i}")).collect();
                Market::new(names("P", self.n), names("A", self.m), pv, av)
            }
        }
    }
}

fn random_orders(rng: &mut ChaCha8Rng, owners: usize, partners: usize) -> Vec<Vec<usize>> {
    (0..owners)
        .map(|_| {
            let mut order: Vec<usize> = (0..partners).collect();
            order.shuffle(rng);
            order
        })
        .collect()
}

fn random_values(rng: &mut ChaCha8Rng, owners: usize, partners: usize) -> Vec<Vec<f64>> {
    (0..owners)
        .map(|_| {
            let mut row: Vec<f64> = Vec::with_capacity(partners);
            while row.len() < partners {
                let v = 1.0 - rng.gen::<f64>();
                if !row.contains(&v) {
                    row.push(v);
                }
            }
            row
        })
        .collect()
}
