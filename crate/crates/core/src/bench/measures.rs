use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::io::ResultRow;
use super::simulate::Policy;
use crate::error::{invalid, Error, Result};

pub const SUBOPTIMAL_INITIAL: &str = "suboptimal_initial_decision";
pub const PROMISED: &str = "promised_makespan";
pub const MAX_MAKESPAN: &str = "max_makespan";
pub const MAKESPAN: &str = "makespan";
pub const PROMISED_TO_MAX_PH: &str = "promised_to_max_ph";
/// Ratio of the instance averages rather than the average of ratios.
pub const PROMISED_TO_MAX_PH_OF_MEANS: &str = "promised_to_max_ph_of_means";
pub const MAX_TO_MAX_PH: &str = "max_makespan_to_max_ph";
pub const MAKESPAN_TO_PH: &str = "makespan_to_ph";
pub const MAX_TO_MAX_AR: &str = "max_makespan_to_max_ar";

/// One measure for one policy: per-instance values (instance order) and
/// their mean and sample deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    pub name: String,
    pub policy: Policy,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl Measure {
    fn new(name: impl Into<String>, policy: Policy, values: Vec<f64>) -> Self {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        Measure { name: name.into(), policy, values, mean, std }
    }
}

struct Cell<'a> {
    rows: Vec<&'a ResultRow>,
}

impl Cell<'_> {
    fn promised(&self) -> f64 {
        self.rows[0].promised
    }
    fn max(&self) -> f64 {
        self.rows.iter().map(|r| r.realized).fold(f64::NEG_INFINITY, f64::max)
    }
    fn mean(&self) -> f64 {
        self.rows.iter().map(|r| r.realized).sum::<f64>() / self.rows.len() as f64
    }
}

/// Performance measures per policy. Perfect-hindsight rows are required for
/// every (instance, scenario) that another policy ran on. The initial
/// decision is compared with the adjustable policy when present, otherwise
/// with the two-stage policy.
pub fn compute_measures(rows: &[ResultRow]) -> Result<Vec<Measure>> {
    let mut cells: BTreeMap<(&str, Policy), Cell> = BTreeMap::new();
    let mut ph: BTreeMap<(&str, usize), f64> = BTreeMap::new();
    for r in rows {
        cells.entry((r.instance.as_str(), r.policy)).or_insert(Cell { rows: Vec::new() }).rows.push(r);
        if r.policy == Policy::Ph {
            ph.insert((r.instance.as_str(), r.scenario), r.realized);
        }
    }
    let instances: Vec<&str> = {
        let mut v: Vec<&str> = cells.keys().map(|k| k.0).collect();
        v.dedup();
        v
    };
    let policies: Vec<Policy> = {
        let mut v: Vec<Policy> = cells.keys().map(|k| k.1).collect();
        v.sort();
        v.dedup();
        v
    };
    let ph_of = |inst: &str, s: usize| {
        ph.get(&(inst, s))
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("no perfect-hindsight result for instance {inst} scenario {s}")))
    };
    let reference = [Policy::ArDp, Policy::ArMilo, Policy::TwoStage].into_iter().find(|p| policies.contains(p));
    let ar = [Policy::ArDp, Policy::ArMilo].into_iter().find(|p| policies.contains(p));

    let mut out = Vec::new();
    for &p in &policies {
        let mut acc: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        let mut push = |name, v| acc.entry(name).or_default().push(v);
        let (mut sum_promised, mut sum_max_ph) = (0.0, 0.0);
        for &inst in &instances {
            let Some(cell) = cells.get(&(inst, p)) else {
                return invalid(format!("policy {p} has no results for instance {inst}"));
            };
            let phs: Vec<f64> = cell.rows.iter().map(|r| ph_of(inst, r.scenario)).collect::<Result<_>>()?;
            let max_ph = phs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            push(PROMISED, cell.promised());
            push(MAX_MAKESPAN, cell.max());
            push(MAKESPAN, cell.mean());
            push(PROMISED_TO_MAX_PH, cell.promised() / max_ph - 1.0);
            push(MAX_TO_MAX_PH, cell.max() / max_ph - 1.0);
            let ratio: f64 = cell.rows.iter().zip(&phs).map(|(r, ph)| r.realized / ph).sum::<f64>() / phs.len() as f64;
            push(MAKESPAN_TO_PH, ratio - 1.0);
            sum_promised += cell.promised();
            sum_max_ph += max_ph;
            if let Some(a) = ar.and_then(|a| cells.get(&(inst, a))) {
                push(MAX_TO_MAX_AR, cell.max() / a.max() - 1.0);
            }
            if let Some(rc) = reference.filter(|_| p != Policy::Ph).and_then(|r| cells.get(&(inst, r))) {
                let differs = rc.rows[0].first_decision_tasks()? != cell.rows[0].first_decision_tasks()?;
                push(SUBOPTIMAL_INITIAL, if differs { 100.0 } else { 0.0 });
            }
        }
        let order = [
            SUBOPTIMAL_INITIAL,
            PROMISED,
            MAX_MAKESPAN,
            MAKESPAN,
            PROMISED_TO_MAX_PH,
            MAX_TO_MAX_PH,
            MAKESPAN_TO_PH,
            MAX_TO_MAX_AR,
        ];
        for name in order {
            if let Some(values) = acc.remove(name) {
                let label = match (name, reference) {
                    (SUBOPTIMAL_INITIAL, Some(r)) => format!("{name}_vs_{r}"),
                    _ => name.to_string(),
                };
                out.push(Measure::new(label, p, values));
            }
            if name == PROMISED_TO_MAX_PH {
                out.push(Measure::new(PROMISED_TO_MAX_PH_OF_MEANS, p, vec![sum_promised / sum_max_ph - 1.0]));
            }
        }
    }
    Ok(out)
}

/// Empirical distribution function as (value, fraction at or below) steps.
pub fn ecdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() as f64;
    v.into_iter().enumerate().map(|(i, x)| (x, (i + 1) as f64 / k)).collect()
}

#[derive(Serialize)]
struct MeasureRow<'a> {
    measure: &'a str,
    policy: Policy,
    mean: f64,
    std: f64,
    count: usize,
}

#[derive(Serialize)]
struct EcdfRow<'a> {
    measure: &'a str,
    policy: Policy,
    x: f64,
    y: f64,
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_measures(out: impl Write, measures: &[Measure]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for m in measures {
        w.serialize(MeasureRow { measure: &m.name, policy: m.policy, mean: m.mean, std: m.std, count: m.values.len() })
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ecdf(out: impl Write, measures: &[Measure]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for m in measures {
        for (x, y) in ecdf(&m.values) {
            w.serialize(EcdfRow { measure: &m.name, policy: m.policy, x, y }).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(inst: &str, p: Policy, s: usize, promised: f64, realized: f64, first: &str) -> ResultRow {
        ResultRow {
            instance: inst.into(),
            policy: p,
            scenario: s,
            promised,
            realized,
            first_decision: first.into(),
            solve_ms: None,
        }
    }

    fn find<'a>(ms: &'a [Measure], name: &str, p: Policy) -> &'a Measure {
        ms.iter().find(|m| m.name == name && m.policy == p).unwrap()
    }

    /// Four-task promises with perfect hindsight per scenario from an exhaustive scan.
    fn four_task_rows(scale: f64) -> Vec<ResultRow> {
        let scenarios = [
            [3.0, 2.0, 3.0, 5.5],
            [4.5, 2.0, 3.5, 4.0],
            [4.75, 2.0, 3.0, 4.0],
            [2.5, 3.5, 3.0, 4.0],
            [0.25, 5.0, 3.5, 4.0],
        ];
        let mut rows = Vec::new();
        for (s, d) in scenarios.iter().enumerate() {
            let ph = (0..16u32)
                .map(|mask| {
                    let a: f64 = (0..4).filter(|i| mask >> i & 1 == 1).map(|i| d[i]).sum();
                    a.max(d.iter().sum::<f64>() - a)
                })
                .fold(f64::INFINITY, f64::min);
            rows.push(row("t3", Policy::Ph, s, ph * scale, ph * scale, ""));
            rows.push(row("t3", Policy::ArDp, s, 7.5 * scale, 7.0 * scale, "1 4"));
            rows.push(row("t3", Policy::Sl, s, 8.0 * scale, 7.5 * scale, "2 3"));
            rows.push(row("t3", Policy::Sa, s, 8.5 * scale, 8.0 * scale, "1 3"));
        }
        rows
    }

    #[test]
    fn perfect_hindsight_against_itself_is_zero() {
        let ms = compute_measures(&four_task_rows(1.0)).unwrap();
        for name in [PROMISED_TO_MAX_PH, MAX_TO_MAX_PH, MAKESPAN_TO_PH] {
            assert_eq!(find(&ms, name, Policy::Ph).mean, 0.0);
        }
    }

    #[test]
    fn four_task_promises() {
        let ms = compute_measures(&four_task_rows(1.0)).unwrap();
        let max_ph = 7.5;
        assert_eq!(find(&ms, PROMISED_TO_MAX_PH, Policy::ArDp).mean, 7.5 / max_ph - 1.0);
        assert_eq!(find(&ms, PROMISED_TO_MAX_PH, Policy::Sl).mean, 8.0 / max_ph - 1.0);
        assert_eq!(find(&ms, PROMISED_TO_MAX_PH, Policy::Sa).mean, 8.5 / max_ph - 1.0);
        assert_eq!(find(&ms, "suboptimal_initial_decision_vs_ar-dp", Policy::Sl).mean, 100.0);
        assert_eq!(find(&ms, "suboptimal_initial_decision_vs_ar-dp", Policy::ArDp).mean, 0.0);
        assert_eq!(find(&ms, MAX_TO_MAX_AR, Policy::Sa).mean, 8.0 / 7.0 - 1.0);
    }

    #[test]
    fn ratios_are_scale_free() {
        let a = compute_measures(&four_task_rows(1.0)).unwrap();
        let b = compute_measures(&four_task_rows(3.7)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            if x.name.contains("_to_") {
                assert!((x.mean - y.mean).abs() < 1e-12, "{}", x.name);
            }
        }
    }

    #[test]
    fn missing_perfect_hindsight_is_invalid() {
        let rows: Vec<ResultRow> =
            four_task_rows(1.0).into_iter().filter(|r| r.policy != Policy::Ph || r.scenario != 2).collect();
        assert!(matches!(compute_measures(&rows), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn csv_outputs_have_headers() {
        let ms = compute_measures(&four_task_rows(1.0)).unwrap();
        let mut a = Vec::new();
        write_measures(&mut a, &ms).unwrap();
        assert!(String::from_utf8(a).unwrap().starts_with("measure,policy,mean,std,count\n"));
        let mut b = Vec::new();
        write_ecdf(&mut b, &ms).unwrap();
        assert!(String::from_utf8(b).unwrap().starts_with("measure,policy,x,y\n"));
    }

    proptest! {
        #[test]
        fn ecdf_is_a_nondecreasing_step_function(v in prop::collection::vec(-10.0f64..10.0, 1..50)) {
            let e = ecdf(&v);
            prop_assert_eq!(e.len(), v.len());
            prop_assert!(e.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
            prop_assert!(e.iter().all(|p| p.1 > 0.0 && p.1 <= 1.0));
            prop_assert_eq!(e.last().unwrap().1, 1.0);
        }
    }
}
