//! Seeded random instances.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::instance::Instance;
use crate::rational::{self, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    Equal,
    /// Integers drawn uniformly from 1..=9, then normalized.
    Random,
}

impl FromStr for WeightMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "equal" => Ok(WeightMode::Equal),
            "random" => Ok(WeightMode::Random),
            _ => Err(format!("unknown weight mode {s:?} (expected equal or random)")),
        }
    }
}

impl fmt::Display for WeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightMode::Equal => "equal",
            WeightMode::Random => "random",
        })
    }
}

/// Every value is `k` or 1 with probability 1/2 each.
pub fn random_instance<R: Rng>(rng: &mut R, n: usize, m: usize, k: &Rational, weights: WeightMode) -> Instance {
    let high: Vec<Vec<bool>> = (0..n).map(|_| (0..m).map(|_| rng.gen_bool(0.5)).collect()).collect();
    let w: Vec<Rational> = match weights {
        WeightMode::Equal => vec![rational::one(); n],
        WeightMode::Random => (0..n).map(|_| rational::int(rng.gen_range(1..=9))).collect(),
    };
    Instance::from_pattern(high, k.clone(), w).expect("generated instances are valid")
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Same seed, same instance.
pub fn seeded_instance(seed: u64, n: usize, m: usize, k: &Rational, weights: WeightMode) -> Instance {
    random_instance(&mut rng_from_seed(seed), n, m, k, weights)
}
