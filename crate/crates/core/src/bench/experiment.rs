use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{derive_seed, generate_budgeted_instance, generate_small_instance, sample_scenario, Family};
use super::simulate::{decide, rolling_horizon, Policy, SimulationRecord};
use crate::error::{invalid, Error, Result};
use crate::model::{Instance, State};
use crate::uncertainty::UncertaintySet;

/// One experiment: a family of random instances and the policies to run
/// on each of their evaluation scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: Family,
    pub n: usize,
    #[serde(default = "two")]
    pub m: usize,
    /// Scenarios per discrete instance; they double as evaluation scenarios.
    #[serde(default = "fifteen")]
    pub scenarios: usize,
    pub instances: usize,
    /// Sampled evaluation scenarios per budgeted instance.
    #[serde(default = "fifty")]
    pub eval_scenarios: usize,
    /// Budget as a fraction of n.
    #[serde(default)]
    pub gamma_fraction: f64,
    pub seed: u64,
    pub policies: Vec<Policy>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Record solve wall time; off keeps the output reproducible.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn two() -> usize {
    2
}
fn fifteen() -> usize {
    15
}
fn fifty() -> usize {
    50
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.instances == 0 || self.policies.is_empty() || self.m < 2 {
            return invalid("need n > 0, m >= 2, at least one instance and one policy");
        }
        match self.family {
            Family::Budgeted if self.eval_scenarios == 0 => invalid("need at least one evaluation scenario"),
            Family::Budgeted if !(0.0..=1.0).contains(&self.gamma_fraction) => {
                invalid(format!("budget fraction {} outside [0, 1]", self.gamma_fraction))
            }
            Family::SmallTypeI | Family::SmallTypeII if self.scenarios == 0 => invalid("need at least one scenario"),
            _ => Ok(()),
        }
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn instance(&self, k: usize) -> Result<Instance> {
        let seed = derive_seed(&[self.seed, k as u64]);
        let mut inst = match self.family {
            Family::Budgeted => generate_budgeted_instance(seed, self.n, self.m, self.gamma_fraction * self.n as f64)?,
            f => generate_small_instance(seed, self.n, self.scenarios, f)?,
        };
        inst.label = format!("{k:04}");
        Ok(inst)
    }

    /// Evaluation scenarios of instance `k` in time units.
    pub fn evaluation_scenarios(&self, k: usize, inst: &Instance) -> Vec<Vec<f64>> {
        match &inst.set {
            UncertaintySet::Discrete(ds) => (0..ds.scenarios.len()).map(|s| ds.scenario_units(s)).collect(),
            UncertaintySet::Budgeted(b) => (0..self.eval_scenarios)
                .map(|s| sample_scenario(b, derive_seed(&[self.seed, k as u64, s as u64])))
                .collect(),
            UncertaintySet::Box(b) => vec![b.upper.clone()],
        }
    }
}

/// Runs every (instance, policy) pair: one decision at time zero, then a
/// rolling-horizon run per evaluation scenario starting from it. Output is
/// ordered by instance, policy, scenario regardless of thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<SimulationRecord>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let cells: Vec<(usize, Policy)> =
        (0..cfg.instances).flat_map(|k| cfg.policies.iter().map(move |&p| (k, p))).collect();
    let per_cell: Vec<Result<Vec<SimulationRecord>>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(k, p)| {
                let inst = cfg.instance(k)?;
                let scenarios = cfg.evaluation_scenarios(k, &inst);
                let first = if p == Policy::Ph {
                    None
                } else if inst.set.is_discrete() {
                    Some(decide(p, &inst, &State::<i64>::initial())?)
                } else {
                    Some(decide(p, &inst, &State::<f64>::initial())?)
                };
                scenarios
                    .iter()
                    .enumerate()
                    .map(|(s, d)| {
                        let mut r = rolling_horizon(p, &inst, d, first.as_ref())?;
                        r.scenario = s;
                        if !cfg.timing {
                            r.solve_ms = None;
                        }
                        Ok(r)
                    })
                    .collect()
            })
            .collect()
    });
    let mut out = Vec::new();
    for cell in per_cell {
        out.extend(cell?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            family: Family::SmallTypeII,
            n: 4,
            m: 2,
            scenarios: 4,
            instances: 3,
            eval_scenarios: 0,
            gamma_fraction: 0.0,
            seed: 5,
            policies: vec![Policy::Sa, Policy::ArDp, Policy::Ph],
            output: None,
            timing: false,
            threads: Some(2),
        }
    }

    #[test]
    fn config_parses_from_toml() {
        let cfg = ExperimentConfig::from_toml(
            "family = \"large-budgeted\"\nn = 10\ninstances = 2\ngamma_fraction = 0.3\nseed = 1\npolicies = [\"sa\", \"2ssa\", \"ph\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.family, Family::Budgeted);
        assert_eq!(cfg.policies, vec![Policy::Sa, Policy::TwoStage, Policy::Ph]);
        assert_eq!((cfg.m, cfg.eval_scenarios), (2, 50));
        assert!(ExperimentConfig::from_toml(
            "family = \"large-budgeted\"\nn = 10\ninstances = 2\nseed = 1\npolicies = [\"x\"]\n"
        )
        .is_err());
    }

    #[test]
    fn records_are_ordered_and_complete() {
        let recs = run_experiment(&small()).unwrap();
        assert_eq!(recs.len(), 3 * 3 * 4);
        let keys: Vec<(String, usize)> = recs.iter().map(|r| (r.instance.clone(), r.scenario)).collect();
        assert_eq!(keys[0], ("0000".to_string(), 0));
        assert!(recs.iter().all(|r| r.solve_ms.is_none()));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut one = small();
        one.threads = Some(1);
        assert_eq!(run_experiment(&one).unwrap(), run_experiment(&small()).unwrap());
    }
}
