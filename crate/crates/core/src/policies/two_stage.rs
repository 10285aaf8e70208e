use std::collections::BTreeSet;

use crate::error::{invalid, Error, Result};
use crate::mip::{solve_mip, Program, Relation, Sense, Status};
use crate::model::{finishes_before, from_ticks, State, Time};
use crate::policies::solve_sa_from;
use crate::uncertainty::UncertaintySet;

/// Gap at which the column generation stops.
const CCG_TOL: f64 = 1e-6;

/// Start two tasks, wait for the first of them to finish, then commit to a
/// static allocation of everything left.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStagePlan {
    /// Tasks to start now.
    pub tasks: Vec<usize>,
    /// The two running tasks whose first completion triggers the allocation.
    pub pair: (usize, usize),
    /// Worst case when `pair.0` (resp. `pair.1`) finishes first; `None` if it cannot.
    pub branches: [Option<f64>; 2],
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct TwoStageOptions {
    /// Columns per branch before giving up.
    pub max_columns: usize,
}

impl Default for TwoStageOptions {
    fn default() -> Self {
        TwoStageOptions { max_columns: 100 }
    }
}

pub fn solve_2ssa<T: Time>(set: &UncertaintySet, m: usize, state: &State<T>) -> Result<TwoStagePlan> {
    solve_2ssa_with(set, m, state, &TwoStageOptions::default())
}

/// Best first decision over all pairs (or partners of the running task),
/// smallest worst case first, lexicographic on ties.
pub fn solve_2ssa_with<T: Time>(
    set: &UncertaintySet,
    m: usize,
    state: &State<T>,
    opts: &TwoStageOptions,
) -> Result<TwoStagePlan> {
    if m != 2 {
        return invalid("the two-stage policy is defined for two machines");
    }
    if set.dim() > 64 {
        return Err(Error::Capacity("the two-stage policy supports at most 64 tasks".into()));
    }
    if set.condition(state).is_empty() {
        return Err(Error::EmptySet);
    }
    let unstarted = state.unstarted(set.dim());
    let candidates: Vec<Vec<usize>> = match (state.running.len(), unstarted.len()) {
        (2, _) | (_, 0) => return invalid("no scheduling decision at this state"),
        (0, 1) | (1, _) => unstarted.iter().map(|&i| vec![i]).collect(),
        _ => {
            let mut c = Vec::new();
            for (k, &i) in unstarted.iter().enumerate() {
                for &j in &unstarted[k + 1..] {
                    c.push(vec![i, j]);
                }
            }
            c
        }
    };
    let discrete = set.is_discrete();
    let tie = if discrete { from_ticks(1) / 2.0 } else { CCG_TOL };
    let mut best: Option<TwoStagePlan> = None;
    for tasks in candidates {
        let limit = best.as_ref().map(|b| b.value - tie);
        let plan = if discrete {
            let s = state.map(|v| v.ticks());
            let mut next = s.clone();
            for &i in &tasks {
                next = next.start(i)?;
            }
            evaluate(&next, limit, |s, a, stop| discrete_branch(set, s, a, stop))?
        } else {
            let s = state.map(|v| v.units());
            let mut next = s.clone();
            for &i in &tasks {
                next = next.start(i)?;
            }
            evaluate(&next, limit, |s, a, stop| ccg_branch(set, s, a, stop, opts))?
        };
        let Some((pair, branches, value)) = plan else { continue };
        if best.as_ref().is_none_or(|b| value < b.value - tie) {
            best = Some(TwoStagePlan { tasks, pair, branches, value });
        }
    }
    best.ok_or(Error::EmptySet)
}

type Evaluated = Option<((usize, usize), [Option<f64>; 2], f64)>;

/// Both branches of a state with two running tasks (or the plain worst case
/// with one). `None` when the value provably reaches `limit`.
fn evaluate<T: Time>(
    state: &State<T>,
    limit: Option<f64>,
    mut branch: impl FnMut(&State<T>, usize, Option<f64>) -> Result<Option<f64>>,
) -> Result<Evaluated> {
    let mut run: Vec<usize> = state.running.iter().map(|r| r.0).collect();
    run.sort_unstable();
    if run.len() == 1 {
        let v = branch(state, run[0], limit)?;
        let Some(v) = v else { return Err(Error::EmptySet) };
        if limit.is_some_and(|l| v >= l) {
            return Ok(None);
        }
        return Ok(Some(((run[0], run[0]), [Some(v), None], v)));
    }
    let mut branches = [None, None];
    let mut worst = f64::NEG_INFINITY;
    for (k, &a) in run.iter().enumerate() {
        branches[k] = branch(state, a, limit)?;
        if let Some(v) = branches[k] {
            worst = worst.max(v);
        }
        if limit.is_some_and(|l| worst >= l) {
            return Ok(None);
        }
    }
    if branches.iter().all(Option::is_none) {
        return Err(Error::EmptySet);
    }
    Ok(Some(((run[0], run[1]), branches, worst)))
}

/// Worst allocation value over the completion events in which `a` finishes
/// first, enumerated over the consistent scenarios.
fn discrete_branch(set: &UncertaintySet, state: &State<i64>, a: usize, stop: Option<f64>) -> Result<Option<f64>> {
    let UncertaintySet::Discrete(ds) = set.condition(state).set else { unreachable!("discrete set") };
    let start = |i: usize| state.start_time(i).expect("running task");
    let events: BTreeSet<i64> = ds
        .scenarios
        .iter()
        .filter_map(|d| {
            let ca = start(a) + d[a];
            let first = state.running.iter().all(|&(b, _)| b == a || finishes_before(ca, a, start(b) + d[b], b));
            first.then_some(ca)
        })
        .collect();
    let mut worst: Option<f64> = None;
    for c in events.into_iter().rev() {
        let next = state.advance(a, c)?;
        let v = if next.unstarted(set.dim()).is_empty() && next.running.is_empty() {
            from_ticks(c)
        } else {
            solve_sa_from(set, 2, &next)?.value
        };
        worst = Some(worst.map_or(v, |w: f64| w.max(v)));
        if stop.is_some_and(|s| v >= s) {
            break;
        }
    }
    Ok(worst)
}

/// Duration of coordinate i is `c_i + g_i u_i` with u in a box, optionally
/// under a budget on the sum of u.
struct Affine {
    c: Vec<f64>,
    g: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    budget: Option<f64>,
}

impl Affine {
    fn new(set: &UncertaintySet) -> Result<Self> {
        match set {
            UncertaintySet::Box(b) => Ok(Affine {
                c: b.lower.clone(),
                g: b.upper.iter().zip(&b.lower).map(|(u, l)| u - l).collect(),
                lo: vec![0.0; b.lower.len()],
                hi: vec![1.0; b.lower.len()],
                budget: None,
            }),
            UncertaintySet::Budgeted(b) => Ok(Affine {
                c: b.nominal.clone(),
                g: b.deviation.clone(),
                lo: b.u_lo.clone(),
                hi: b.u_hi.clone(),
                budget: Some(b.budget),
            }),
            UncertaintySet::Discrete(_) => invalid("discrete sets are enumerated"),
        }
    }

    fn max(&self, i: usize) -> f64 {
        self.c[i] + self.g[i] * self.hi[i]
    }
}

/// Column and constraint generation for the branch in which `a` finishes
/// first. The master picks the duration of `a` and, per known allocation, a
/// worst completion; the subproblem is the static allocation after the event.
fn ccg_branch(
    set: &UncertaintySet,
    state: &State<f64>,
    a: usize,
    stop: Option<f64>,
    opts: &TwoStageOptions,
) -> Result<Option<f64>> {
    let cond = set.condition(state);
    let aff = Affine::new(&cond.set)?;
    let n = set.dim();
    let sa = state.start_time(a).expect("running task");
    let other = state.running.iter().map(|r| r.0).find(|&b| b != a);
    let remaining = state.unstarted(n);
    let clamp = |da: f64| {
        let lo = cond.set.coord_min(a);
        let mut hi = cond.set.coord_max(a);
        if let Some(b) = other {
            hi = hi.min(state.start_time(b).expect("running") + cond.set.coord_max(b) - sa);
        }
        da.clamp(lo, hi.max(lo))
    };
    let subproblem = |da: f64| -> Result<(f64, Vec<usize>)> {
        let next = state.advance(a, sa + clamp(da))?;
        if next.running.is_empty() && remaining.is_empty() {
            return Ok((next.clock, Vec::new()));
        }
        let plan = solve_sa_from(set, 2, &next)?;
        // queue behind the machine that just became idle
        let idle = if next.running.is_empty() { 0 } else { 1 };
        Ok((plan.value, plan.queues[idle].clone()))
    };
    let Some(b) = other else {
        // the last task: nothing is left to allocate
        return Ok(Some(subproblem(cond.set.coord_max(a))?.0));
    };
    let sb = state.start_time(b).expect("running task");

    // initial column: longest nominal first onto the earlier free machine
    let nominal = cond.set.nominal();
    let mut free = [sa + nominal[a], sb + nominal[b]];
    let mut order = remaining.clone();
    order.sort_by(|&x, &y| nominal[y].total_cmp(&nominal[x]).then(x.cmp(&y)));
    let mut first = Vec::new();
    for i in order {
        let k = if free[0] <= free[1] { 0 } else { 1 };
        free[k] += nominal[i];
        if k == 0 {
            first.push(i);
        }
    }
    first.sort_unstable();
    let mut columns: Vec<Vec<usize>> = vec![first];
    let mut lower = f64::NEG_INFINITY;
    loop {
        let Some((upper, da)) = master(&aff, state, a, b, &remaining, &columns)? else {
            return Ok(None);
        };
        let (v, column) = subproblem(da)?;
        lower = lower.max(v);
        if lower >= upper - CCG_TOL || stop.is_some_and(|s| lower >= s) || columns.contains(&column) {
            return Ok(Some(lower));
        }
        if columns.len() >= opts.max_columns {
            return Err(Error::Limit(format!(
                "column generation stopped after {} columns with gap {:e}",
                columns.len(),
                upper - lower
            )));
        }
        columns.push(column);
    }
}

/// Adversary master: maximize t with t at most every known allocation's
/// makespan under its own completion durations, all sharing the duration of
/// `a` and keeping `a` first. Returns (t, duration of a).
fn master(
    aff: &Affine,
    state: &State<f64>,
    a: usize,
    b: usize,
    remaining: &[usize],
    columns: &[Vec<usize>],
) -> Result<Option<(f64, f64)>> {
    let n = aff.c.len();
    let sa = state.start_time(a).expect("running");
    let sb = state.start_time(b).expect("running");
    let free = |i: usize| aff.hi[i] - aff.lo[i] > 0.0 && aff.g[i] != 0.0;
    let big = sa.max(sb)
        + (0..n).filter(|&i| i == a || i == b || remaining.contains(&i)).map(|i| aff.max(i)).sum::<f64>()
        + 1.0;
    let mut p = Program::new(Sense::Maximize);
    let t = p.add_var("t", 0.0, big, false);
    p.set_objective(t, 1.0);
    let ua = free(a).then(|| p.add_var(format!("u_{}", a + 1), aff.lo[a], aff.hi[a], false));
    for (k, col) in columns.iter().enumerate() {
        let mut u = vec![None; n];
        u[a] = ua;
        for &i in remaining.iter().chain(std::iter::once(&b)) {
            if free(i) {
                u[i] = Some(p.add_var(format!("u_{}_{}", k + 1, i + 1), aff.lo[i], aff.hi[i], false));
            }
        }
        // duration of i as (terms, constant)
        let dur = |i: usize| -> (Vec<(usize, f64)>, f64) {
            match u[i] {
                Some(v) => (vec![(v, aff.g[i])], aff.c[i]),
                None => (Vec::new(), aff.c[i] + aff.g[i] * aff.lo[i]),
            }
        };
        if let Some(budget) = aff.budget {
            let row: Vec<(usize, f64)> = (0..n).filter_map(|i| u[i].map(|v| (v, 1.0))).collect();
            let pinned: f64 = (0..n).filter(|&i| u[i].is_none()).map(|i| aff.lo[i]).sum();
            if !row.is_empty() {
                p.add_row(row, Relation::Le, budget - pinned);
            } else if pinned > budget + 1e-9 {
                return Ok(None);
            }
        }
        // a finishes no later than b
        let (ta, ca) = dur(a);
        let (tb, cb) = dur(b);
        let mut row = ta.clone();
        row.extend(tb.iter().map(|&(v, g)| (v, -g)));
        if row.is_empty() {
            if sa + ca > sb + cb + 1e-9 {
                return Ok(None);
            }
        } else {
            p.add_row(row, Relation::Le, sb + cb - sa - ca);
        }
        // t <= load of a's machine + M z and t <= load of b's machine + M (1 - z)
        let z = p.add_binary(format!("z_{}", k + 1));
        for (machine, head, own, sign) in [(0, sa, a, 1.0), (1, sb, b, -1.0)] {
            let mut row = vec![(t, 1.0)];
            let mut rhs = head;
            let tasks = remaining.iter().filter(|i| col.contains(i) == (machine == 0)).copied();
            for i in std::iter::once(own).chain(tasks) {
                let (terms, c) = dur(i);
                row.extend(terms.into_iter().map(|(v, g)| (v, -g)));
                rhs += c;
            }
            row.push((z, -sign * big));
            if sign < 0.0 {
                rhs += big;
            }
            p.add_row(row, Relation::Le, rhs);
        }
    }
    let sol = solve_mip(&p)?;
    match sol.status {
        Status::Optimal => {
            let da = match ua {
                Some(v) => aff.c[a] + aff.g[a] * sol.values[v],
                None => aff.c[a] + aff.g[a] * aff.lo[a],
            };
            Ok(Some((sol.objective, da)))
        }
        Status::Infeasible => Ok(None),
        s => Err(Error::Numerical(format!("two-stage master ended with {s:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::{solve_ar_dp, solve_ph, solve_sa};
    use crate::uncertainty::{BudgetedSet, DiscreteSet};
    use rand::{Rng, SeedableRng};

    fn three_task() -> UncertaintySet {
        UncertaintySet::Budgeted(BudgetedSet::new(vec![0.0580, 0.1945, 0.5866], vec![0.95, 0.75, 0.48], 2.5).unwrap())
    }

    #[test]
    fn three_task_budgeted_matches_adjustable() {
        let plan = solve_2ssa(&three_task(), 2, &State::<f64>::initial()).unwrap();
        assert!((plan.value - 1.83).abs() <= 0.005, "{plan:?}");
    }

    #[test]
    fn no_budget_is_perfect_hindsight() {
        let d0 = vec![1.5, 0.7, 2.2, 1.1, 0.9];
        let set = UncertaintySet::Budgeted(BudgetedSet::new(d0.clone(), vec![0.5; 5], 0.0).unwrap());
        let plan = solve_2ssa(&set, 2, &State::<f64>::initial()).unwrap();
        assert!((plan.value - solve_ph(&d0, 2).unwrap().1).abs() < 1e-6, "{plan:?}");
    }

    #[test]
    fn between_adjustable_and_static_on_random_discrete_sets() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let sc: Vec<Vec<i64>> = (0..6).map(|_| (0..5).map(|_| rng.gen_range(1..=40) * 10).collect()).collect();
            let set = UncertaintySet::Discrete(DiscreteSet::new(sc).unwrap());
            let s0 = State::<i64>::initial();
            let two = solve_2ssa(&set, 2, &s0).unwrap().value;
            let ar = solve_ar_dp(&set, 2, &s0).unwrap().value;
            let sa = solve_sa(&set, 2).unwrap().1;
            assert!(ar <= two && two <= sa, "{ar} {two} {sa}");
        }
    }

    #[test]
    fn swapping_the_pair_swaps_the_branches() {
        let set = three_task();
        let UncertaintySet::Budgeted(b) = &set else { unreachable!() };
        let perm = [1usize, 0, 2];
        let swapped = UncertaintySet::Budgeted(
            BudgetedSet::new(
                perm.iter().map(|&i| b.nominal[i]).collect(),
                perm.iter().map(|&i| b.deviation[i]).collect(),
                b.budget,
            )
            .unwrap(),
        );
        let s = State::<f64>::initial().start(0).unwrap().start(1).unwrap();
        let x = evaluate(&s, None, |s, a, stop| ccg_branch(&set, s, a, stop, &TwoStageOptions::default()))
            .unwrap()
            .unwrap();
        let y = evaluate(&s, None, |s, a, stop| ccg_branch(&swapped, s, a, stop, &TwoStageOptions::default()))
            .unwrap()
            .unwrap();
        assert!((x.1[0].unwrap() - y.1[1].unwrap()).abs() < 1e-6);
        assert!((x.1[1].unwrap() - y.1[0].unwrap()).abs() < 1e-6);
        assert!((x.2 - y.2).abs() < 1e-6);
    }

    #[test]
    fn discrete_branches_enumerate_events() {
        let set = UncertaintySet::Discrete(
            DiscreteSet::from_units(&[
                vec![3.0, 2.0, 3.0, 5.5],
                vec![4.5, 2.0, 3.5, 4.0],
                vec![4.75, 2.0, 3.0, 4.0],
                vec![2.5, 3.5, 3.0, 4.0],
                vec![0.25, 5.0, 3.5, 4.0],
            ])
            .unwrap(),
        );
        let plan = solve_2ssa(&set, 2, &State::<i64>::initial()).unwrap();
        let ar = solve_ar_dp(&set, 2, &State::initial()).unwrap().value;
        assert!(plan.value >= ar && plan.value <= 8.5, "{plan:?}");
    }
}
