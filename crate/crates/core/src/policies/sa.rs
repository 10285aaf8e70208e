use crate::error::{invalid, Error, Result};
use crate::mip::{solve_mip, Program, Relation, Sense, Status};
use crate::model::{from_ticks, Partition, State, Time, TICKS_PER_UNIT};
use crate::uncertainty::UncertaintySet;

const TOL: f64 = 1e-9;

/// Static allocation of the unstarted tasks from a state.
///
/// Machine `j < running.len()` is busy with `state.running[j]`; its queue
/// starts when that task finishes. The remaining machines are idle.
#[derive(Debug, Clone, PartialEq)]
pub struct SaPlan {
    pub queues: Vec<Vec<usize>>,
    pub value: f64,
}

impl SaPlan {
    /// Task each idle machine starts now: the longest worst-case duration in
    /// its queue, lowest index on ties.
    pub fn first_tasks(&self, set: &UncertaintySet, busy: usize) -> Vec<usize> {
        let mut tasks: Vec<usize> = self.queues[busy..]
            .iter()
            .filter_map(|q| {
                q.iter().copied().reduce(|a, b| if set.coord_max(b) > set.coord_max(a) + TOL { b } else { a })
            })
            .collect();
        tasks.sort_unstable();
        tasks
    }
}

/// Worst-case total duration of a group of tasks over a fixed set.
#[derive(Debug, Clone)]
pub(crate) enum Loads {
    Box {
        hi: Vec<f64>,
    },
    /// Base durations at the u floors, unit gains and u room, greedy order.
    Budgeted {
        base: Vec<f64>,
        gain: Vec<f64>,
        room: Vec<f64>,
        budget: f64,
        order: Vec<usize>,
    },
    Discrete {
        scenarios: Vec<Vec<f64>>,
    },
}

impl Loads {
    pub(crate) fn new(set: &UncertaintySet) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        Ok(match set {
            UncertaintySet::Box(b) => Loads::Box { hi: b.upper.clone() },
            UncertaintySet::Budgeted(b) => {
                let n = b.nominal.len();
                let base = (0..n).map(|i| b.nominal[i] + b.deviation[i] * b.u_lo[i]).collect();
                let room = (0..n).map(|i| (b.u_hi[i] - b.u_lo[i]).max(0.0)).collect();
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&x, &y| b.deviation[y].total_cmp(&b.deviation[x]).then(x.cmp(&y)));
                let budget = (b.budget - b.u_lo.iter().sum::<f64>()).max(0.0);
                Loads::Budgeted { base, gain: b.deviation.clone(), room, budget, order }
            }
            UncertaintySet::Discrete(ds) => {
                Loads::Discrete { scenarios: (0..ds.scenarios.len()).map(|s| ds.scenario_units(s)).collect() }
            }
        })
    }

    /// Worst case of the summed durations of the tasks in `mask`.
    pub(crate) fn worst(&self, mask: u64) -> f64 {
        let has = |i: usize| mask >> i & 1 == 1;
        match self {
            Loads::Box { hi } => (0..hi.len()).filter(|&i| has(i)).map(|i| hi[i]).sum(),
            Loads::Budgeted { base, gain, room, budget, order } => {
                let mut v: f64 = (0..base.len()).filter(|&i| has(i)).map(|i| base[i]).sum();
                let mut left = *budget;
                for &i in order {
                    if left <= 0.0 || gain[i] <= 0.0 {
                        break;
                    }
                    if has(i) {
                        let step = room[i].min(left);
                        v += step * gain[i];
                        left -= step;
                    }
                }
                v
            }
            Loads::Discrete { scenarios } => scenarios
                .iter()
                .map(|d| (0..d.len()).filter(|&i| has(i)).map(|i| d[i]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Least amount task `i` can add to any group.
    fn min_increment(&self, i: usize) -> f64 {
        match self {
            Loads::Box { hi } => hi[i],
            Loads::Budgeted { base, .. } => base[i],
            Loads::Discrete { scenarios } => scenarios.iter().map(|d| d[i]).fold(f64::INFINITY, f64::min),
        }
    }

    fn largest(&self, i: usize) -> f64 {
        self.worst(1 << i)
    }
}

/// Optimal static allocation at time zero on `m` machines.
pub fn solve_sa(set: &UncertaintySet, m: usize) -> Result<(Partition, f64)> {
    let plan = solve_sa_from(set, m, &State::<f64>::initial())?;
    let mut assignment = vec![0; set.dim()];
    for (j, q) in plan.queues.iter().enumerate() {
        for &i in q {
            assignment[i] = j;
        }
    }
    Ok((Partition { assignment, m }, plan.value))
}

/// Optimal static allocation of the unstarted tasks, evaluated over the set
/// conditioned on `state`. Ties go to the lexicographically first queue
/// assignment in task order.
pub fn solve_sa_from<T: Time>(set: &UncertaintySet, m: usize, state: &State<T>) -> Result<SaPlan> {
    let n = set.dim();
    if n > 64 {
        return Err(Error::Capacity("static allocation supports at most 64 tasks".into()));
    }
    if m < 2 || state.running.len() > m {
        return invalid(format!("need m >= 2 machines and at most m running tasks, got m={m}"));
    }
    let cond = set.condition(state);
    let loads = Loads::new(&cond.set)?;
    let clock = state.clock.units();
    let machines: Vec<(f64, u64)> = (0..m)
        .map(|j| match state.running.get(j) {
            Some(&(i, e)) => (clock - e.units(), 1u64 << i),
            None => (clock, 0),
        })
        .collect();
    let tasks = state.unstarted(n);
    let assignment = if m == 2 || tasks.len() <= 12 {
        search(&loads, &machines, &tasks)
    } else {
        milp(&cond.set, &machines, &tasks)?
    };
    let mut queues = vec![Vec::new(); m];
    for (k, &i) in tasks.iter().enumerate() {
        queues[assignment[k]].push(i);
    }
    let mut value = queues
        .iter()
        .zip(&machines)
        .map(|(q, &(head, mask))| machine_value(&loads, head, q.iter().fold(mask, |a, &i| a | 1 << i)))
        .fold(clock, f64::max);
    if set.is_discrete() {
        value = from_ticks((value * TICKS_PER_UNIT as f64).round() as i64);
    }
    Ok(SaPlan { queues, value })
}

fn machine_value(loads: &Loads, head: f64, mask: u64) -> f64 {
    if mask == 0 {
        head
    } else {
        head + loads.worst(mask)
    }
}

/// Exact partition search: branch and bound for the value, then the
/// lexicographically first assignment attaining it.
fn search(loads: &Loads, machines: &[(f64, u64)], tasks: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by(|&a, &b| loads.largest(tasks[b]).total_cmp(&loads.largest(tasks[a])).then(a.cmp(&b)));
    let values: Vec<f64> = machines.iter().map(|&(h, mask)| machine_value(loads, h, mask)).collect();
    let masks: Vec<u64> = machines.iter().map(|m| m.1).collect();

    // greedy incumbent
    let (mut gm, mut gv) = (masks.clone(), values.clone());
    for &k in &order {
        let i = tasks[k];
        let j = (0..machines.len())
            .min_by(|&x, &y| {
                machine_value(loads, machines[x].0, gm[x] | 1 << i).total_cmp(&machine_value(
                    loads,
                    machines[y].0,
                    gm[y] | 1 << i,
                ))
            })
            .expect("machines");
        gm[j] |= 1 << i;
        gv[j] = machine_value(loads, machines[j].0, gm[j]);
    }
    let mut best = gv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rest: f64 = tasks.iter().map(|&i| loads.min_increment(i)).sum();
    let mut s =
        Bnb { loads, machines, tasks, order: &order, best: &mut best, masks: masks.clone(), values: values.clone() };
    s.improve(0, rest);

    let limit = best + TOL * best.abs().max(1.0);
    let mut assignment = vec![0; tasks.len()];
    let (mut fm, mut fv) = (masks, values);
    let found = first_fit(loads, machines, tasks, limit, 0, &mut fm, &mut fv, &mut assignment);
    debug_assert!(found, "an assignment attains the searched value");
    assignment
}

struct Bnb<'a> {
    loads: &'a Loads,
    machines: &'a [(f64, u64)],
    tasks: &'a [usize],
    order: &'a [usize],
    best: &'a mut f64,
    masks: Vec<u64>,
    values: Vec<f64>,
}

impl Bnb<'_> {
    fn improve(&mut self, k: usize, rest: f64) {
        let current = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let avg = (self.values.iter().sum::<f64>() + rest) / self.values.len() as f64;
        if current.max(avg) >= *self.best - TOL * self.best.abs().max(1.0) {
            return;
        }
        let Some(&t) = self.order.get(k) else {
            *self.best = current;
            return;
        };
        let i = self.tasks[t];
        let rest = rest - self.loads.min_increment(i);
        for j in 0..self.machines.len() {
            // identical idle machines are interchangeable
            if self.masks[j] == 0
                && (0..j).any(|q| self.masks[q] == 0 && (self.machines[q].0 - self.machines[j].0).abs() <= TOL)
            {
                continue;
            }
            let (mask, value) = (self.masks[j], self.values[j]);
            self.masks[j] |= 1 << i;
            self.values[j] = machine_value(self.loads, self.machines[j].0, self.masks[j]);
            if self.values[j] < *self.best - TOL * self.best.abs().max(1.0) {
                self.improve(k + 1, rest);
            }
            self.masks[j] = mask;
            self.values[j] = value;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn first_fit(
    loads: &Loads,
    machines: &[(f64, u64)],
    tasks: &[usize],
    limit: f64,
    k: usize,
    masks: &mut [u64],
    values: &mut [f64],
    assignment: &mut [usize],
) -> bool {
    let Some(&i) = tasks.get(k) else { return true };
    for j in 0..machines.len() {
        let (mask, value) = (masks[j], values[j]);
        masks[j] |= 1 << i;
        values[j] = machine_value(loads, machines[j].0, masks[j]);
        if values[j] <= limit {
            assignment[k] = j;
            if first_fit(loads, machines, tasks, limit, k + 1, masks, values, assignment) {
                return true;
            }
        }
        masks[j] = mask;
        values[j] = value;
    }
    false
}

/// Weight of a task in a machine's load row.
#[derive(Clone, Copy)]
enum Coef {
    /// assignment binary
    Var(usize),
    /// already on the machine
    Fixed,
}

/// Assignment program for many machines: minimize z with z at least every
/// machine's worst-case completion, the inner maximum dualized.
fn milp(set: &UncertaintySet, machines: &[(f64, u64)], tasks: &[usize]) -> Result<Vec<usize>> {
    let n = set.dim();
    let m = machines.len();
    let mut p = Program::new(Sense::Minimize);
    let z = p.add_var("z", 0.0, f64::INFINITY, false);
    p.set_objective(z, 1.0);
    let x: Vec<Vec<usize>> =
        tasks.iter().map(|&i| (0..m).map(|j| p.add_binary(format!("x_{}_{}", i + 1, j + 1))).collect()).collect();
    for row in &x {
        p.add_row(row.iter().map(|&v| (v, 1.0)).collect(), Relation::Eq, 1.0);
    }
    let weight = |j: usize, i: usize| -> Option<Coef> {
        if machines[j].1 >> i & 1 == 1 {
            Some(Coef::Fixed)
        } else {
            tasks.iter().position(|&t| t == i).map(|k| Coef::Var(x[k][j]))
        }
    };
    for (j, &(head, _)) in machines.iter().enumerate() {
        match set {
            UncertaintySet::Discrete(ds) => {
                for s in 0..ds.scenarios.len() {
                    let d = ds.scenario_units(s);
                    let mut row = vec![(z, 1.0)];
                    let mut rhs = head;
                    for i in 0..n {
                        match weight(j, i) {
                            Some(Coef::Var(v)) => row.push((v, -d[i])),
                            Some(Coef::Fixed) => rhs += d[i],
                            None => {}
                        }
                    }
                    p.add_row(row, Relation::Ge, rhs);
                }
            }
            UncertaintySet::Box(b) => {
                let mut row = vec![(z, 1.0)];
                let mut rhs = head;
                for i in 0..n {
                    match weight(j, i) {
                        Some(Coef::Var(v)) => row.push((v, -b.upper[i])),
                        Some(Coef::Fixed) => rhs += b.upper[i],
                        None => {}
                    }
                }
                p.add_row(row, Relation::Ge, rhs);
            }
            UncertaintySet::Budgeted(b) => {
                // max over u of sum w_i (d0_i + dev_i u_i) has dual
                // budget * pi + sum room_i rho_i with pi + rho_i >= w_i dev_i
                let spare = (b.budget - b.u_lo.iter().sum::<f64>()).max(0.0);
                let pi = p.add_var(format!("pi_{}", j + 1), 0.0, f64::INFINITY, false);
                let mut row = vec![(z, 1.0), (pi, -spare)];
                let mut rhs = head;
                for i in 0..n {
                    let base = b.nominal[i] + b.deviation[i] * b.u_lo[i];
                    let room = (b.u_hi[i] - b.u_lo[i]).max(0.0);
                    let w = weight(j, i);
                    match w {
                        Some(Coef::Var(v)) => row.push((v, -base)),
                        Some(Coef::Fixed) => rhs += base,
                        None => continue,
                    }
                    let rho = p.add_var(format!("rho_{}_{}", j + 1, i + 1), 0.0, f64::INFINITY, false);
                    row.push((rho, -room));
                    let mut cover = vec![(pi, 1.0), (rho, 1.0)];
                    let mut need = 0.0;
                    match w {
                        Some(Coef::Var(v)) => cover.push((v, -b.deviation[i])),
                        Some(Coef::Fixed) => need = b.deviation[i],
                        None => unreachable!(),
                    }
                    p.add_row(cover, Relation::Ge, need);
                }
                p.add_row(row, Relation::Ge, rhs);
            }
        }
    }
    let sol = solve_mip(&p)?;
    if sol.status != Status::Optimal {
        return Err(Error::Numerical(format!("static allocation program ended with {:?}", sol.status)));
    }
    Ok(x.iter().map(|row| row.iter().position(|&v| sol.values[v] > 0.5).expect("assignment row")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::evaluate_partition;
    use crate::policies::solve_ph;
    use crate::uncertainty::{BoxSet, BudgetedSet, DiscreteSet};
    use proptest::prelude::*;

    fn four_task() -> UncertaintySet {
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

    /// Worst case of every assignment, by enumeration of machines^tasks.
    fn brute(set: &UncertaintySet, m: usize, state: &State<f64>) -> f64 {
        let cond = set.condition(state);
        let loads = Loads::new(&cond.set).unwrap();
        let tasks = state.unstarted(set.dim());
        let clock = state.clock;
        (0..m.pow(tasks.len() as u32))
            .map(|mut code| {
                let mut masks: Vec<u64> = (0..m).map(|j| state.running.get(j).map_or(0, |r| 1 << r.0)).collect();
                for &i in &tasks {
                    masks[code % m] |= 1 << i;
                    code /= m;
                }
                (0..m)
                    .map(|j| {
                        let head = state.running.get(j).map_or(clock, |r| clock - r.1);
                        machine_value(&loads, head, masks[j])
                    })
                    .fold(clock, f64::max)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn four_task_partition() {
        let (p, v) = solve_sa(&four_task(), 2).unwrap();
        assert_eq!(v, 8.5);
        assert_eq!(p.assignment, vec![0, 0, 1, 1]);
    }

    #[test]
    fn three_task_budgeted_example() {
        let set = UncertaintySet::Budgeted(
            BudgetedSet::new(vec![0.0580, 0.1945, 0.5866], vec![0.95, 0.75, 0.48], 2.5).unwrap(),
        );
        let (p, v) = solve_sa(&set, 2).unwrap();
        assert!((v - 1.95).abs() <= 0.005, "{v}");
        // {1,2} reaches 1.9525 while {1,3} reaches 2.0746
        assert_eq!(p.parts(), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn single_scenario_is_perfect_hindsight() {
        let d = vec![3.0, 2.0, 3.0, 5.5, 1.25];
        let set = UncertaintySet::Discrete(DiscreteSet::from_units(std::slice::from_ref(&d)).unwrap());
        assert_eq!(solve_sa(&set, 2).unwrap().1, solve_ph(&d, 2).unwrap().1);
        assert_eq!(solve_sa(&set, 3).unwrap().1, solve_ph(&d, 3).unwrap().1);
    }

    #[test]
    fn first_tasks_take_the_longest_of_each_idle_queue() {
        let set = four_task();
        let plan = solve_sa_from(&set, 2, &State::<i64>::initial()).unwrap();
        // queues {1,2} and {3,4}: task 2 reaches 5, task 4 reaches 5.5
        assert_eq!(plan.first_tasks(&set, 0), vec![1, 3]);
    }

    #[test]
    fn busy_machine_counts_its_running_task() {
        let set = UncertaintySet::Box(BoxSet::new(vec![1.0; 3], vec![2.0, 3.0, 1.0]).unwrap());
        let s = State::<f64>::initial().start(1).unwrap().start(0).unwrap().advance(0, 1.5).unwrap();
        let plan = solve_sa_from(&set, 2, &s).unwrap();
        // task 2 runs until 3; task 3 on the idle machine ends by 2.5
        assert_eq!(plan.queues, vec![vec![], vec![2]]);
        assert!((plan.value - 3.0).abs() < 1e-12);
    }

    fn budgeted() -> impl Strategy<Value = UncertaintySet> {
        (3usize..7).prop_flat_map(|n| {
            (prop::collection::vec(0.5f64..5.0, n), prop::collection::vec(0.0f64..1.0, n), 0.0f64..1.0).prop_map(
                move |(d0, a, g)| {
                    let dev = d0.iter().zip(&a).map(|(x, y)| x * y).collect();
                    UncertaintySet::Budgeted(BudgetedSet::new(d0, dev, g * n as f64).unwrap())
                },
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn search_matches_enumeration(set in budgeted(), m in 2usize..4, started in 0usize..2) {
            let mut state = State::<f64>::initial();
            for i in 0..started {
                state = state.start(i).unwrap();
            }
            let plan = solve_sa_from(&set, m, &state).unwrap();
            let want = brute(&set, m, &state);
            prop_assert!((plan.value - want).abs() <= 1e-9 * want.max(1.0), "{} vs {}", plan.value, want);
        }

        #[test]
        fn program_matches_search(set in budgeted()) {
            let cond = set.condition(&State::<f64>::initial());
            let loads = Loads::new(&cond.set).unwrap();
            let machines = vec![(0.0, 0); 3];
            let tasks: Vec<usize> = (0..set.dim()).collect();
            let eval = |a: &[usize]| {
                let p = Partition { assignment: a.to_vec(), m: 3 };
                p.parts().iter().map(|q| machine_value(&loads, 0.0, q.iter().fold(0, |s, &i| s | 1 << i))).fold(0.0, f64::max)
            };
            let a = search(&loads, &machines, &tasks);
            let b = milp(&set, &machines, &tasks).unwrap();
            prop_assert!((eval(&a) - eval(&b)).abs() <= 1e-6, "{} vs {}", eval(&a), eval(&b));
        }

        #[test]
        fn value_is_the_worst_case_of_the_partition(set in budgeted()) {
            let (p, v) = solve_sa(&set, 2).unwrap();
            let worst = p.parts().iter().map(|q| {
                let mut c = vec![0.0; set.dim()];
                for &i in q { c[i] = 1.0; }
                set.max_linear(&c, &[]).unwrap().0
            }).fold(0.0, f64::max);
            prop_assert!((worst - v).abs() <= 1e-9);
            let _ = evaluate_partition(&p, &set.nominal()).unwrap();
        }
    }
}
