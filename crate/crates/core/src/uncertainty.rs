//! Uncertainty sets, conditioning on a system state, and linear worst cases.

use crate::error::{invalid, Error, Result};
use crate::mip::{solve_lp, Program, Relation, Sense, Status};
use crate::model::{from_ticks, State, Time, TIME_TOL};

/// Per-task interval bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return invalid("box bounds differ in length");
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(0.0 <= *l && l <= u)) {
            return invalid("box bounds must satisfy 0 <= lower <= upper");
        }
        Ok(BoxSet { lower, upper })
    }
}

/// d = nominal + u * deviation with u in [u_lo, u_hi] and sum(u) <= budget.
///
/// Fresh sets have u in [0, 1]; conditioning tightens the per-task u bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetedSet {
    pub nominal: Vec<f64>,
    pub deviation: Vec<f64>,
    pub budget: f64,
    pub u_lo: Vec<f64>,
    pub u_hi: Vec<f64>,
}

impl BudgetedSet {
    pub fn new(nominal: Vec<f64>, deviation: Vec<f64>, budget: f64) -> Result<Self> {
        let n = nominal.len();
        if deviation.len() != n {
            return invalid("nominal and deviation differ in length");
        }
        if nominal.iter().any(|&v| !(v > 0.0)) || deviation.iter().any(|&v| !(v >= 0.0)) {
            return invalid("need nominal > 0 and deviation >= 0");
        }
        if !(0.0..=n as f64).contains(&budget) {
            return invalid(format!("budget {budget} outside [0, {n}]"));
        }
        Ok(BudgetedSet { nominal, deviation, budget, u_lo: vec![0.0; n], u_hi: vec![1.0; n] })
    }

    /// Deviation proportional to the nominal durations.
    pub fn proportional(nominal: Vec<f64>, alpha: f64, budget: f64) -> Result<Self> {
        let deviation = nominal.iter().map(|v| alpha * v).collect();
        Self::new(nominal, deviation, budget)
    }

    pub fn duration(&self, u: &[f64]) -> Vec<f64> {
        self.nominal.iter().zip(&self.deviation).zip(u).map(|((a, b), u)| a + b * u).collect()
    }

    fn spare_budget(&self) -> f64 {
        self.budget - self.u_lo.iter().sum::<f64>()
    }

    /// Greedy maximizer of c'd: raise u on the largest c_i * deviation_i first.
    fn greedy_max(&self, c: &[f64]) -> (f64, Vec<f64>) {
        let mut u = self.u_lo.clone();
        let mut order: Vec<usize> = (0..c.len()).collect();
        order.sort_by(|&a, &b| (c[b] * self.deviation[b]).total_cmp(&(c[a] * self.deviation[a])).then(a.cmp(&b)));
        let mut spare = self.spare_budget().max(0.0);
        for i in order {
            if spare <= 0.0 || c[i] * self.deviation[i] <= 0.0 {
                break;
            }
            let step = (self.u_hi[i] - self.u_lo[i]).min(spare);
            u[i] += step;
            spare -= step;
        }
        let d = self.duration(&u);
        (dot(c, &d), d)
    }
}

/// Finite scenario list stored in integer ticks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteSet {
    pub scenarios: Vec<Vec<i64>>,
}

impl DiscreteSet {
    pub fn new(scenarios: Vec<Vec<i64>>) -> Result<Self> {
        let Some(first) = scenarios.first() else {
            return invalid("a discrete set needs at least one scenario");
        };
        let n = first.len();
        if scenarios.iter().any(|s| s.len() != n) {
            return invalid("scenarios differ in length");
        }
        if scenarios.iter().flatten().any(|&v| v <= 0) {
            return invalid("scenario durations must be positive");
        }
        Ok(DiscreteSet { scenarios })
    }

    /// Build from durations in time units; every value must lie on the tick grid.
    pub fn from_units(scenarios: &[Vec<f64>]) -> Result<Self> {
        let ticks = scenarios
            .iter()
            .map(|s| s.iter().map(|&v| crate::model::to_ticks(v)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(ticks)
    }

    pub fn scenario_units(&self, s: usize) -> Vec<f64> {
        self.scenarios[s].iter().map(|&v| from_ticks(v)).collect()
    }
}

/// Linear side constraint over the duration vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<(usize, f64)>,
    pub rel: Relation,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(coeffs: Vec<(usize, f64)>, rel: Relation, rhs: f64) -> Self {
        LinearConstraint { coeffs, rel, rhs }
    }

    pub fn holds(&self, d: &[f64]) -> bool {
        let lhs: f64 = self.coeffs.iter().map(|&(i, a)| a * d[i]).sum();
        match self.rel {
            Relation::Le => lhs <= self.rhs + TIME_TOL,
            Relation::Ge => lhs >= self.rhs - TIME_TOL,
            Relation::Eq => (lhs - self.rhs).abs() <= TIME_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintySet {
    Box(BoxSet),
    Budgeted(BudgetedSet),
    Discrete(DiscreteSet),
}

/// A set restricted by the realized and elapsed durations of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedSet {
    pub fixed: Vec<(usize, f64)>,
    pub floors: Vec<(usize, f64)>,
    pub set: UncertaintySet,
}

impl ConditionedSet {
    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl UncertaintySet {
    pub fn dim(&self) -> usize {
        match self {
            UncertaintySet::Box(b) => b.lower.len(),
            UncertaintySet::Budgeted(b) => b.nominal.len(),
            UncertaintySet::Discrete(s) => s.scenarios.first().map_or(0, Vec::len),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, UncertaintySet::Discrete(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            UncertaintySet::Box(_) => "box",
            UncertaintySet::Budgeted(_) => "budgeted",
            UncertaintySet::Discrete(_) => "discrete",
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            UncertaintySet::Box(b) => b.lower.iter().zip(&b.upper).any(|(l, u)| l > &(u + TIME_TOL)),
            UncertaintySet::Budgeted(b) => {
                b.u_lo.iter().zip(&b.u_hi).any(|(l, u)| l > &(u + TIME_TOL)) || b.spare_budget() < -TIME_TOL
            }
            UncertaintySet::Discrete(s) => s.scenarios.is_empty(),
        }
    }

    pub fn contains(&self, d: &[f64]) -> bool {
        if d.len() != self.dim() {
            return false;
        }
        match self {
            UncertaintySet::Box(b) => {
                d.iter().enumerate().all(|(i, &v)| v >= b.lower[i] - TIME_TOL && v <= b.upper[i] + TIME_TOL)
            }
            UncertaintySet::Budgeted(b) => {
                let mut used = 0.0;
                for (i, &v) in d.iter().enumerate() {
                    let u = if b.deviation[i] > 0.0 {
                        (v - b.nominal[i]) / b.deviation[i]
                    } else if (v - b.nominal[i]).abs() <= TIME_TOL {
                        b.u_lo[i]
                    } else {
                        return false;
                    };
                    if u < b.u_lo[i] - TIME_TOL || u > b.u_hi[i] + TIME_TOL {
                        return false;
                    }
                    used += u;
                }
                used <= b.budget + TIME_TOL
            }
            UncertaintySet::Discrete(s) => {
                let Ok(t) = d.iter().map(|&v| crate::model::to_ticks(v)).collect::<Result<Vec<_>>>() else {
                    return false;
                };
                s.scenarios.contains(&t)
            }
        }
    }

    /// Exact membership for a tick-valued vector.
    pub fn contains_ticks(&self, d: &[i64]) -> bool {
        match self {
            UncertaintySet::Discrete(s) => s.scenarios.iter().any(|sc| sc.as_slice() == d),
            _ => self.contains(&d.iter().map(|&v| from_ticks(v)).collect::<Vec<_>>()),
        }
    }

    /// Largest value of coordinate `i` over the set.
    pub fn coord_max(&self, i: usize) -> f64 {
        match self {
            UncertaintySet::Box(b) => b.upper[i],
            UncertaintySet::Budgeted(b) => {
                let room = b.spare_budget() + b.u_lo[i];
                b.nominal[i] + b.deviation[i] * b.u_hi[i].min(room)
            }
            UncertaintySet::Discrete(s) => {
                s.scenarios.iter().map(|sc| from_ticks(sc[i])).fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    pub fn coord_min(&self, i: usize) -> f64 {
        match self {
            UncertaintySet::Box(b) => b.lower[i],
            UncertaintySet::Budgeted(b) => b.nominal[i] + b.deviation[i] * b.u_lo[i],
            UncertaintySet::Discrete(s) => s.scenarios.iter().map(|sc| from_ticks(sc[i])).fold(f64::INFINITY, f64::min),
        }
    }

    /// Central duration vector: nominal, box midpoint, or scenario mean.
    pub fn nominal(&self) -> Vec<f64> {
        match self {
            UncertaintySet::Box(b) => b.lower.iter().zip(&b.upper).map(|(l, u)| 0.5 * (l + u)).collect(),
            UncertaintySet::Budgeted(b) => b.nominal.clone(),
            UncertaintySet::Discrete(s) => {
                let r = s.scenarios.len() as f64;
                (0..self.dim()).map(|i| s.scenarios.iter().map(|sc| from_ticks(sc[i])).sum::<f64>() / r).collect()
            }
        }
    }

    /// Restrict to durations consistent with `state`: finished tasks take their
    /// realized durations, running tasks last at least their elapsed time.
    pub fn condition<T: Time>(&self, state: &State<T>) -> ConditionedSet {
        let fixed: Vec<(usize, f64)> =
            state.finished.iter().zip(&state.realized).map(|(&i, v)| (i, v.units())).collect();
        let floors: Vec<(usize, f64)> = state.running.iter().map(|&(i, e)| (i, e.units())).collect();
        let set = match self {
            UncertaintySet::Box(b) => {
                let mut b = b.clone();
                for &(i, v) in &fixed {
                    if v < b.lower[i] - TIME_TOL || v > b.upper[i] + TIME_TOL {
                        b.lower[i] = f64::INFINITY;
                    } else {
                        b.lower[i] = v;
                        b.upper[i] = v;
                    }
                }
                for &(i, v) in &floors {
                    if v > b.upper[i] + TIME_TOL {
                        b.lower[i] = f64::INFINITY;
                    } else {
                        b.lower[i] = b.lower[i].max(v.min(b.upper[i]));
                    }
                }
                UncertaintySet::Box(b)
            }
            UncertaintySet::Budgeted(b) => {
                let mut b = b.clone();
                for &(i, v) in &fixed {
                    pin_u(&mut b, i, v, true);
                }
                for &(i, v) in &floors {
                    pin_u(&mut b, i, v, false);
                }
                UncertaintySet::Budgeted(b)
            }
            UncertaintySet::Discrete(s) => {
                let fixed_t: Vec<(usize, i64)> =
                    state.finished.iter().zip(&state.realized).map(|(&i, v)| (i, v.ticks())).collect();
                let floors_t: Vec<(usize, i64)> = state.running.iter().map(|&(i, e)| (i, e.ticks())).collect();
                let scenarios = s
                    .scenarios
                    .iter()
                    .filter(|sc| fixed_t.iter().all(|&(i, v)| sc[i] == v) && floors_t.iter().all(|&(i, v)| sc[i] >= v))
                    .cloned()
                    .collect();
                UncertaintySet::Discrete(DiscreteSet { scenarios })
            }
        };
        ConditionedSet { fixed, floors, set }
    }

    /// Exact maximum of c'd over the set intersected with `extra`.
    pub fn max_linear(&self, c: &[f64], extra: &[LinearConstraint]) -> Result<(f64, Vec<f64>)> {
        if self.is_empty() {
            return Err(Error::EmptySet);
        }
        if c.len() != self.dim() {
            return invalid(format!("weight vector has {} entries, set has {}", c.len(), self.dim()));
        }
        match self {
            UncertaintySet::Discrete(s) => {
                let mut best: Option<(f64, Vec<f64>)> = None;
                for k in 0..s.scenarios.len() {
                    let d = s.scenario_units(k);
                    if !extra.iter().all(|e| e.holds(&d)) {
                        continue;
                    }
                    let v = dot(c, &d);
                    if best.as_ref().is_none_or(|b| v > b.0) {
                        best = Some((v, d));
                    }
                }
                best.ok_or(Error::EmptySet)
            }
            UncertaintySet::Box(b) if extra.is_empty() => {
                let d: Vec<f64> =
                    c.iter().enumerate().map(|(i, &ci)| if ci > 0.0 { b.upper[i] } else { b.lower[i] }).collect();
                Ok((dot(c, &d), d))
            }
            UncertaintySet::Budgeted(b) if extra.is_empty() && c.iter().all(|&v| v >= 0.0) => Ok(b.greedy_max(c)),
            _ => self.max_linear_lp(c, extra),
        }
    }

    fn max_linear_lp(&self, c: &[f64], extra: &[LinearConstraint]) -> Result<(f64, Vec<f64>)> {
        let mut p = Program::new(Sense::Maximize);
        let d: Vec<usize> = (0..self.dim()).map(|i| p.add_var(format!("d_{i}"), 0.0, f64::INFINITY, false)).collect();
        self.embed(&mut p, &d, "u")?;
        for (i, &v) in d.iter().enumerate() {
            p.set_objective(v, c[i]);
        }
        for e in extra {
            p.add_row(e.coeffs.iter().map(|&(i, a)| (d[i], a)).collect(), e.rel, e.rhs);
        }
        let s = solve_lp(&p)?;
        match s.status {
            Status::Optimal => Ok((s.objective, d.iter().map(|&v| s.values[v]).collect())),
            Status::Infeasible => Err(Error::EmptySet),
            _ => Err(Error::Numerical("unbounded worst case over a bounded set".into())),
        }
    }

    /// Add rows forcing the variables `d` to lie in the set. Budgeted sets add
    /// continuous u variables, discrete sets add one selector binary per scenario.
    pub fn embed(&self, p: &mut Program, d: &[usize], prefix: &str) -> Result<()> {
        if d.len() != self.dim() {
            return invalid("variable count does not match the set dimension");
        }
        match self {
            UncertaintySet::Box(b) => {
                for (i, &v) in d.iter().enumerate() {
                    p.add_row(vec![(v, 1.0)], Relation::Ge, b.lower[i]);
                    p.add_row(vec![(v, 1.0)], Relation::Le, b.upper[i]);
                }
            }
            UncertaintySet::Budgeted(b) => {
                let u: Vec<usize> =
                    (0..d.len()).map(|i| p.add_var(format!("{prefix}_{i}"), b.u_lo[i], b.u_hi[i], false)).collect();
                for (i, &v) in d.iter().enumerate() {
                    p.add_row(vec![(v, 1.0), (u[i], -b.deviation[i])], Relation::Eq, b.nominal[i]);
                }
                p.add_row(u.iter().map(|&v| (v, 1.0)).collect(), Relation::Le, b.budget);
            }
            UncertaintySet::Discrete(s) => {
                if s.scenarios.is_empty() {
                    return Err(Error::EmptySet);
                }
                let y: Vec<usize> = (0..s.scenarios.len()).map(|k| p.add_binary(format!("{prefix}_{k}"))).collect();
                p.add_row(y.iter().map(|&v| (v, 1.0)).collect(), Relation::Eq, 1.0);
                for (i, &v) in d.iter().enumerate() {
                    let mut row = vec![(v, 1.0)];
                    row.extend(y.iter().enumerate().map(|(k, &yk)| (yk, -from_ticks(s.scenarios[k][i]))));
                    p.add_row(row, Relation::Eq, 0.0);
                }
            }
        }
        Ok(())
    }
}

/// Tighten u bounds for d_i = v (exact) or d_i >= v (floor). Infeasible
/// requests leave u_lo > u_hi so the set reports empty.
fn pin_u(b: &mut BudgetedSet, i: usize, v: f64, exact: bool) {
    let (lo, hi) = (b.u_lo[i], b.u_hi[i]);
    if b.deviation[i] <= 0.0 {
        let bad = if exact { (v - b.nominal[i]).abs() > TIME_TOL } else { v > b.nominal[i] + TIME_TOL };
        if bad {
            b.u_lo[i] = f64::INFINITY;
        }
        return;
    }
    let u = (v - b.nominal[i]) / b.deviation[i];
    let tol = TIME_TOL / b.deviation[i];
    if u > hi + tol || (exact && u < lo - tol) {
        b.u_lo[i] = f64::INFINITY;
        return;
    }
    let u = u.clamp(lo, hi);
    b.u_lo[i] = if exact { u } else { lo.max(u) };
    if exact {
        b.u_hi[i] = u;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn four_task() -> UncertaintySet {
        UncertaintySet::Discrete(
            DiscreteSet::from_units(&[
                vec![3.0, 2.0, 3.0, 5.5],
                vec![4.5, 2.0, 3.5, 4.0],
                vec![4.75, 2.0, 3.0, 4.0],
                vec![2.5, 3.5, 3.0, 4.0],
                vec![0.25, 5.0, 3.5, 4.0],
            ])
            .unwrap(),
        )
    }

    fn small_budgeted() -> UncertaintySet {
        UncertaintySet::Budgeted(BudgetedSet::new(vec![0.0580, 0.1945, 0.5866], vec![0.95, 0.75, 0.48], 2.5).unwrap())
    }

    #[test]
    fn membership() {
        let b = UncertaintySet::Box(BoxSet::new(vec![1.0, 1.0], vec![2.0, 2.0]).unwrap());
        assert!(b.contains(&[1.5, 2.0]));
        let g = UncertaintySet::Budgeted(BudgetedSet::new(vec![1.0, 1.0], vec![1.0, 1.0], 1.0).unwrap());
        assert!(!g.contains(&[2.0, 2.0]));
        assert!(g.contains(&[1.5, 1.5]));
        assert!(four_task().contains(&[3.0, 2.0, 3.0, 5.5]));
        assert!(!four_task().contains(&[3.0, 2.0, 3.0, 5.4]));
    }

    #[test]
    fn conditioning_filters_scenarios() {
        let s0 = State::<i64>::initial();
        assert_eq!(four_task().condition(&s0).set, four_task());
        let s = State::<i64>::initial().start(0).unwrap().start(1).unwrap().advance(1, 200).unwrap();
        let c = four_task().condition(&s);
        let UncertaintySet::Discrete(d) = &c.set else { panic!() };
        assert_eq!(d.scenarios.len(), 3);
        assert!(!c.is_empty());
    }

    #[test]
    fn conditioning_budgeted_consumes_budget() {
        let g = UncertaintySet::Budgeted(BudgetedSet::new(vec![1.0; 3], vec![1.0; 3], 1.5).unwrap());
        let s = State::<f64>::initial().start(0).unwrap().advance(0, 2.0).unwrap();
        let c = g.condition(&s);
        // remaining budget for tasks 1 and 2 is 0.5
        let (v, _) = c.set.max_linear(&[0.0, 1.0, 1.0], &[]).unwrap();
        assert!((v - 2.5).abs() < 1e-12);
        let s = State::<f64>::initial().start(0).unwrap().advance(0, 2.5).unwrap();
        assert!(g.condition(&s).is_empty());
    }

    #[test]
    fn budgeted_worst_cases() {
        let g = UncertaintySet::Budgeted(BudgetedSet::new(vec![1.0; 3], vec![1.0; 3], 1.5).unwrap());
        assert!((g.max_linear(&[1.0; 3], &[]).unwrap().0 - 4.5).abs() < 1e-12);
        let g0 = UncertaintySet::Budgeted(BudgetedSet::new(vec![1.0, 2.0], vec![1.0, 1.0], 0.0).unwrap());
        assert!((g0.max_linear(&[2.0, 3.0], &[]).unwrap().0 - 8.0).abs() < 1e-12);
        let s = small_budgeted();
        let (v13, _) = s.max_linear(&[1.0, 0.0, 1.0], &[]).unwrap();
        let (v12, _) = s.max_linear(&[1.0, 1.0, 0.0], &[]).unwrap();
        assert!((v13 - 2.0746).abs() < 1e-9);
        assert!((v12 - 1.9525).abs() < 1e-9);
        let (all, _) = s.max_linear(&[1.0; 3], &[]).unwrap();
        assert!((all - 2.7791).abs() < 1e-9);
        assert!((s.max_linear_lp(&[1.0; 3], &[]).unwrap().0 - 2.7791).abs() < 1e-9);
    }

    #[test]
    fn extra_constraints_route_to_lp() {
        let s = small_budgeted();
        let (greedy, _) = s.max_linear(&[1.0; 3], &[]).unwrap();
        let loose = LinearConstraint::new(vec![(0, 1.0)], Relation::Le, 10.0);
        let (lp, _) = s.max_linear(&[1.0; 3], &[loose]).unwrap();
        assert!((greedy - lp).abs() < 1e-9);
        let tight = LinearConstraint::new(vec![(0, 1.0), (1, -1.0)], Relation::Le, 0.0);
        let (v, d) = s.max_linear(&[1.0; 3], std::slice::from_ref(&tight)).unwrap();
        assert!(tight.holds(&d) && s.contains(&d));
        assert!(v <= greedy + 1e-9);
        let impossible = LinearConstraint::new(vec![(0, 1.0)], Relation::Ge, 5.0);
        assert_eq!(s.max_linear(&[1.0; 3], &[impossible]), Err(Error::EmptySet));
    }

    #[test]
    fn discrete_worst_case_is_enumeration() {
        let t = four_task();
        let (v, d) = t.max_linear(&[1.0, 1.0, 0.0, 0.0], &[]).unwrap();
        assert_eq!(v, 6.75);
        assert_eq!(d, vec![4.75, 2.0, 3.0, 4.0]);
    }
}
