use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::simulate::{Policy, SimulationRecord};
use crate::error::{invalid, Error, Result};
use crate::model::Instance;
use crate::uncertainty::{BoxSet, BudgetedSet, DiscreteSet, UncertaintySet};

pub const FORMAT_VERSION: u32 = 1;

/// On-disk instance. Discrete durations are integer hundredths.
#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    version: u32,
    n: usize,
    m: usize,
    label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    set_kind: String,
    set: SetPayload,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct SetPayload {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    lower: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    upper: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    nominal: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    deviation: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    scenarios: Vec<Vec<i64>>,
}

fn parse_error(e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(e.to_string())
}

pub fn instance_to_string(inst: &Instance) -> Result<String> {
    let set = match &inst.set {
        UncertaintySet::Box(b) => SetPayload { lower: b.lower.clone(), upper: b.upper.clone(), ..Default::default() },
        UncertaintySet::Budgeted(b) => {
            if b.u_lo.iter().any(|&v| v != 0.0) || b.u_hi.iter().any(|&v| v != 1.0) {
                return invalid("only unconditioned budgeted sets can be written");
            }
            SetPayload {
                nominal: b.nominal.clone(),
                deviation: b.deviation.clone(),
                budget: Some(b.budget),
                ..Default::default()
            }
        }
        UncertaintySet::Discrete(d) => SetPayload { scenarios: d.scenarios.clone(), ..Default::default() },
    };
    let file = InstanceFile {
        version: FORMAT_VERSION,
        n: inst.n,
        m: inst.m,
        label: inst.label.clone(),
        seed: inst.seed,
        set_kind: inst.set.kind().to_string(),
        set,
    };
    toml::to_string(&file).map_err(parse_error)
}

pub fn instance_from_str(s: &str) -> Result<Instance> {
    let f: InstanceFile = toml::from_str(s).map_err(parse_error)?;
    if f.version != FORMAT_VERSION {
        return invalid(format!("unsupported instance format version {}", f.version));
    }
    let p = f.set;
    let set = match f.set_kind.as_str() {
        "box" => UncertaintySet::Box(BoxSet::new(p.lower, p.upper)?),
        "budgeted" => {
            let budget = p.budget.ok_or_else(|| Error::InvalidInput("budgeted set without budget".into()))?;
            UncertaintySet::Budgeted(BudgetedSet::new(p.nominal, p.deviation, budget)?)
        }
        "discrete" => UncertaintySet::Discrete(DiscreteSet::new(p.scenarios)?),
        k => return invalid(format!("unknown set kind {k:?}")),
    };
    if set.dim() != f.n {
        return invalid(format!("declared n={} but the set has {} tasks", f.n, set.dim()));
    }
    let inst = Instance::new(f.m, set, f.label)?;
    Ok(match f.seed {
        Some(s) => inst.with_seed(s),
        None => inst,
    })
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    instance_from_str(&std::fs::read_to_string(path)?)
}

pub fn write_instance(path: &Path, inst: &Instance) -> Result<()> {
    std::fs::write(path, instance_to_string(inst)?)?;
    Ok(())
}

/// One row of the results file; tasks are numbered from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance: String,
    pub policy: Policy,
    pub scenario: usize,
    pub promised: f64,
    pub realized: f64,
    pub first_decision: String,
    pub solve_ms: Option<f64>,
}

impl From<&SimulationRecord> for ResultRow {
    fn from(r: &SimulationRecord) -> Self {
        ResultRow {
            instance: r.instance.clone(),
            policy: r.policy,
            scenario: r.scenario,
            promised: r.promised,
            realized: r.realized,
            first_decision: r.first_decision.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(" "),
            solve_ms: r.solve_ms,
        }
    }
}

impl ResultRow {
    pub fn first_decision_tasks(&self) -> Result<Vec<usize>> {
        self.first_decision
            .split_whitespace()
            .map(|t| match t.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i - 1),
                _ => invalid(format!("bad task label {t:?} in first_decision")),
            })
            .collect()
    }
}

pub fn write_results(out: impl Write, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(parse_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(input: impl Read) -> Result<Vec<ResultRow>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(parse_error)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::generate::{generate_budgeted_instance, generate_small_instance, Family};

    #[test]
    fn instances_round_trip() {
        let a = generate_small_instance(3, 5, 15, Family::SmallTypeI).unwrap();
        let b = generate_budgeted_instance(3, 12, 2, 3.6).unwrap();
        let c = Instance::new(
            2,
            UncertaintySet::Box(BoxSet::new(vec![0.5, 1.0, 0.1], vec![1.5, 1.0, 2.25]).unwrap()),
            "box",
        )
        .unwrap();
        for inst in [a, b, c] {
            let s = instance_to_string(&inst).unwrap();
            assert_eq!(instance_from_str(&s).unwrap(), inst);
            assert!(s.starts_with("version = 1"));
        }
    }

    #[test]
    fn bad_instance_files_are_rejected() {
        let inst = generate_small_instance(3, 5, 4, Family::SmallTypeII).unwrap();
        let s = instance_to_string(&inst).unwrap();
        assert!(instance_from_str(&s.replace("version = 1", "version = 9")).is_err());
        assert!(instance_from_str(&s.replace("n = 5", "n = 6")).is_err());
        assert!(instance_from_str(&s.replace("\"discrete\"", "\"ellipsoid\"")).is_err());
        assert!(instance_from_str("not toml").is_err());
    }

    #[test]
    fn results_round_trip_with_header() {
        let rows = vec![
            ResultRow {
                instance: "a".into(),
                policy: Policy::TwoStage,
                scenario: 3,
                promised: 7.5,
                realized: 7.25,
                first_decision: "1 4".into(),
                solve_ms: None,
            },
            ResultRow {
                instance: "b".into(),
                policy: Policy::Ph,
                scenario: 0,
                promised: 1.0 / 3.0,
                realized: 1.0 / 3.0,
                first_decision: String::new(),
                solve_ms: Some(2.5),
            },
        ];
        let mut buf = Vec::new();
        write_results(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("instance,policy,scenario,promised,realized,first_decision,solve_ms\n"));
        assert_eq!(read_results(buf.as_slice()).unwrap(), rows);
        assert_eq!(rows[0].first_decision_tasks().unwrap(), vec![0, 3]);
    }
}
