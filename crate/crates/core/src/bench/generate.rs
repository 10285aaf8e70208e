use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::model::Instance;
use crate::uncertainty::{BudgetedSet, DiscreteSet, UncertaintySet};

/// Instance families of the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Family {
    /// Discrete scenarios with deviation weights from the nonnegative unit ball.
    #[serde(rename = "small-discrete-typeI")]
    #[value(name = "small-discrete-typeI")]
    SmallTypeI,
    /// Discrete scenarios with deviation weights from the unit cube.
    #[serde(rename = "small-discrete-typeII")]
    #[value(name = "small-discrete-typeII")]
    SmallTypeII,
    #[serde(rename = "large-budgeted")]
    #[value(name = "large-budgeted")]
    Budgeted,
}

/// Stable 63-bit seed from a list of integers (fits a TOML integer).
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("32-byte digest")) >> 1
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Deviation weights uniform on the nonnegative part of the unit ball.
pub fn sample_ball(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let u: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        if u.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            return u;
        }
    }
}

/// Nominal and deviation from fixed ranges, `r` scenarios rounded to tenths
/// and clamped at 0.1.
pub fn generate_small_instance(seed: u64, n: usize, r: usize, family: Family) -> Result<Instance> {
    let mut g = rng(seed);
    let d0: Vec<f64> = (0..n).map(|_| g.gen_range(0.1..=2.0)).collect();
    let dbar: Vec<f64> = (0..n).map(|_| g.gen_range(0.1..=5.0)).collect();
    let scenarios = (0..r)
        .map(|_| {
            let u = match family {
                Family::SmallTypeI => sample_ball(&mut g, n),
                _ => (0..n).map(|_| g.gen::<f64>()).collect(),
            };
            (0..n).map(|i| ((d0[i] + u[i] * dbar[i]) * 10.0).round().max(1.0) as i64 * 10).collect()
        })
        .collect();
    let set = UncertaintySet::Discrete(DiscreteSet::new(scenarios)?);
    Ok(Instance::new(2, set, format!("small-{seed:016x}"))?.with_seed(seed))
}

/// Nominal durations uniform on [0.5, 5] and deviations a uniform [0.5, 1]
/// fraction of them.
pub fn generate_budgeted_instance(seed: u64, n: usize, m: usize, gamma: f64) -> Result<Instance> {
    let mut g = rng(seed);
    let d0: Vec<f64> = (0..n).map(|_| g.gen_range(0.5..=5.0)).collect();
    let dbar: Vec<f64> = d0.iter().map(|&d| g.gen_range(0.5..=1.0) * d).collect();
    let set = UncertaintySet::Budgeted(BudgetedSet::new(d0, dbar, gamma)?);
    Ok(Instance::new(m, set, format!("budgeted-{seed:016x}"))?.with_seed(seed))
}

/// Largest deviation-to-nominal ratio of a budgeted set.
pub fn max_alpha(set: &BudgetedSet) -> f64 {
    set.deviation.iter().zip(&set.nominal).map(|(b, d)| b / d).fold(0.0, f64::max)
}

/// Uniform weights on the unit cube, scaled down onto the budget when they
/// exceed it.
pub fn sample_scenario(set: &BudgetedSet, seed: u64) -> Vec<f64> {
    let mut g = rng(seed);
    let mut u: Vec<f64> = (0..set.nominal.len()).map(|_| g.gen::<f64>()).collect();
    let total: f64 = u.iter().sum();
    if total > set.budget {
        let scale = set.budget / total;
        u.iter_mut().for_each(|v| *v *= scale);
    }
    set.duration(&u)
}
