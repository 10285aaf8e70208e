use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{finishes_before, to_ticks, Instance, State, Time};
use crate::policies::{solve_2ssa, solve_ar_dp, solve_ar_milo, solve_ph, solve_sa_from, solve_sl, PolicyDecision};
use crate::uncertainty::UncertaintySet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Policy {
    Sa,
    Sl,
    ArMilo,
    ArDp,
    TwoStage,
    /// Perfect hindsight on the realized scenario.
    Ph,
}

impl Policy {
    pub const ALL: [Policy; 6] = [Policy::Sa, Policy::Sl, Policy::ArMilo, Policy::ArDp, Policy::TwoStage, Policy::Ph];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Sa => "sa",
            Policy::Sl => "sl",
            Policy::ArMilo => "ar-milo",
            Policy::ArDp => "ar-dp",
            Policy::TwoStage => "2ssa",
            Policy::Ph => "ph",
        }
    }

    pub fn is_adjustable(self) -> bool {
        matches!(self, Policy::ArMilo | Policy::ArDp)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown policy {s:?}")))
    }
}

impl TryFrom<String> for Policy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Policy> for String {
    fn from(p: Policy) -> String {
        p.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceEvent {
    Start { task: usize, time: f64 },
    Finish { task: usize, time: f64 },
}

/// One rolling-horizon run of a policy on one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord {
    pub instance: String,
    pub policy: Policy,
    pub scenario: usize,
    pub promised: f64,
    pub realized: f64,
    pub first_decision: Vec<usize>,
    pub trace: Vec<TraceEvent>,
    /// Wall time of all solves in the run, when measured.
    pub solve_ms: Option<f64>,
}

/// Tasks `policy` starts at `state` and its worst-case value from there.
pub fn decide<T: Time>(policy: Policy, inst: &Instance, state: &State<T>) -> Result<PolicyDecision> {
    let (set, m) = (&inst.set, inst.m);
    let idle = m.saturating_sub(state.running.len());
    match policy {
        Policy::Sa => {
            let plan = solve_sa_from(set, m, state)?;
            let cond = set.condition(state).set;
            Ok(PolicyDecision { tasks: plan.first_tasks(&cond, state.running.len()), value: plan.value })
        }
        Policy::Sl => {
            let plan = solve_sl(set, m, state)?;
            let mut tasks: Vec<usize> = plan.order.iter().copied().take(idle).collect();
            tasks.sort_unstable();
            Ok(PolicyDecision { tasks, value: plan.value })
        }
        Policy::ArMilo => solve_ar_milo(set, m, state),
        Policy::ArDp => solve_ar_dp(set, m, &state.map(|v| v.ticks())),
        Policy::TwoStage => {
            let plan = solve_2ssa(set, m, state)?;
            Ok(PolicyDecision { tasks: plan.tasks, value: plan.value })
        }
        Policy::Ph => invalid("perfect hindsight is evaluated per scenario, not decided online"),
    }
}

struct Run {
    first: PolicyDecision,
    realized: f64,
    trace: Vec<TraceEvent>,
    solve: f64,
}

/// Event loop on scenario `d`: at every decision point the policy is
/// re-solved on the conditioned set and its start decision applied.
fn run<T: Time>(policy: Policy, inst: &Instance, d: &[T], forced: Option<&PolicyDecision>) -> Result<Run> {
    let mut state = State::<T>::initial();
    let mut first: Option<PolicyDecision> = None;
    let mut trace = Vec::new();
    let mut solve = 0.0;
    loop {
        let unstarted = state.unstarted(inst.n);
        if state.running.len() < inst.m && !unstarted.is_empty() {
            let dec = match (&first, forced) {
                (None, Some(f)) => f.clone(),
                _ => {
                    let t = Instant::now();
                    let dec = decide(policy, inst, &state)?;
                    solve += t.elapsed().as_secs_f64() * 1e3;
                    dec
                }
            };
            if dec.tasks.len() > inst.m - state.running.len() || dec.tasks.iter().any(|&i| state.is_started(i)) {
                return invalid(format!("{policy} chose an impossible start {:?}", dec.tasks));
            }
            for &i in &dec.tasks {
                state = state.start(i)?;
                trace.push(TraceEvent::Start { task: i, time: state.clock.units() });
            }
            first.get_or_insert(dec);
        }
        let Some((l, c)) = state.running.iter().map(|&(i, e)| (i, state.clock - e + d[i])).reduce(|x, y| {
            if finishes_before(y.1, y.0, x.1, x.0) {
                y
            } else {
                x
            }
        }) else {
            if unstarted.is_empty() {
                break;
            }
            return invalid(format!("{policy} left every machine idle with tasks waiting"));
        };
        state = state.advance(l, c)?;
        trace.push(TraceEvent::Finish { task: l, time: c.units() });
    }
    let first = first.ok_or_else(|| Error::InvalidInput("nothing to schedule".into()))?;
    Ok(Run { first, realized: state.clock.units(), trace, solve })
}

/// Rolling-horizon simulation of `policy` on scenario `d` (time units).
/// `forced` replaces the policy's own decision at time zero.
pub fn rolling_horizon(
    policy: Policy,
    inst: &Instance,
    d: &[f64],
    forced: Option<&PolicyDecision>,
) -> Result<SimulationRecord> {
    if d.len() != inst.n {
        return invalid(format!("scenario has {} durations, instance has {} tasks", d.len(), inst.n));
    }
    let record = |promised, realized, first_decision, trace, solve_ms| SimulationRecord {
        instance: inst.label.clone(),
        policy,
        scenario: 0,
        promised,
        realized,
        first_decision,
        trace,
        solve_ms,
    };
    if policy == Policy::Ph {
        let t = Instant::now();
        let v = if inst.set.is_discrete() {
            let ticks = d.iter().map(|&v| to_ticks(v)).collect::<Result<Vec<_>>>()?;
            solve_ph(&ticks, inst.m)?.1.units()
        } else {
            solve_ph(d, inst.m)?.1
        };
        return Ok(record(v, v, Vec::new(), Vec::new(), Some(t.elapsed().as_secs_f64() * 1e3)));
    }
    let r = if inst.set.is_discrete() {
        let ticks = d.iter().map(|&v| to_ticks(v)).collect::<Result<Vec<_>>>()?;
        run(policy, inst, &ticks, forced)?
    } else {
        run(policy, inst, d, forced)?
    };
    Ok(record(r.first.value, r.realized, r.first.tasks, r.trace, Some(r.solve)))
}

/// Largest realized makespan of the rolling-horizon policy over the set:
/// every scenario of a discrete set, or a grid of step `step` on the
/// deviation weights of a continuous set followed by a pattern search.
pub fn worst_realized(
    policy: Policy,
    inst: &Instance,
    forced: Option<&PolicyDecision>,
    step: f64,
) -> Result<(f64, Vec<f64>)> {
    let eval = |d: &[f64]| rolling_horizon(policy, inst, d, forced).map(|r| r.realized);
    let (base, gain, budget): (Vec<f64>, Vec<f64>, Option<f64>) = match &inst.set {
        UncertaintySet::Discrete(ds) => {
            let mut best = (f64::NEG_INFINITY, Vec::new());
            for s in 0..ds.scenarios.len() {
                let d = ds.scenario_units(s);
                let v = eval(&d)?;
                if v > best.0 {
                    best = (v, d);
                }
            }
            return Ok(best);
        }
        UncertaintySet::Box(b) => (b.lower.clone(), b.upper.iter().zip(&b.lower).map(|(u, l)| u - l).collect(), None),
        UncertaintySet::Budgeted(b) => (b.nominal.clone(), b.deviation.clone(), Some(b.budget)),
    };
    let n = inst.n;
    if !(step > 0.0 && step <= 1.0) {
        return invalid("grid step must lie in (0, 1]");
    }
    let to_d = |u: &[f64]| -> Vec<f64> { (0..n).map(|i| base[i] + gain[i] * u[i]).collect() };
    let feasible = |u: &[f64]| {
        u.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v))
            && budget.is_none_or(|g| u.iter().sum::<f64>() <= g + 1e-9)
    };
    let points = (1.0 / step).round() as usize;
    let levels: Vec<f64> = (0..=points).map(|k| (k as f64 * step).min(1.0)).collect();
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    let mut u = vec![0.0; n];
    let mut idx = vec![0usize; n];
    loop {
        for i in 0..n {
            u[i] = levels[idx[i]];
        }
        // the last weight also tries whatever budget is left
        let head: f64 = u[..n - 1].iter().sum();
        let mut last = vec![u[n - 1]];
        if let Some(g) = budget {
            last.push((g - head).clamp(0.0, 1.0));
        }
        for v in last {
            u[n - 1] = v;
            if feasible(&u) {
                let val = eval(&to_d(&u))?;
                if val > best.0 + 1e-12 {
                    best = (val, u.clone());
                }
            }
        }
        let mut k = 0;
        while k < n {
            idx[k] += 1;
            if idx[k] <= points {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    // pattern search: single-weight moves and budget-neutral transfers
    let mut h = step / 2.0;
    while h > 1e-4 {
        let mut improved = false;
        for i in 0..n {
            for j in 0..n {
                for sign in [1.0, -1.0] {
                    let mut v = best.1.clone();
                    v[i] = (v[i] + sign * h).clamp(0.0, 1.0);
                    if i != j {
                        v[j] = (v[j] - sign * h).clamp(0.0, 1.0);
                    }
                    if v != best.1 && feasible(&v) {
                        let val = eval(&to_d(&v))?;
                        if val > best.0 + 1e-12 {
                            best = (val, v);
                            improved = true;
                        }
                    }
                }
            }
        }
        if !improved {
            h /= 2.0;
        }
    }
    Ok((best.0, to_d(&best.1)))
}
