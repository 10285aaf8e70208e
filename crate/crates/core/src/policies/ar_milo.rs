use std::time::Duration;

use super::PolicyDecision;
use crate::error::{invalid, Error, Result};
use crate::mip::milo::build_subtree_milo;
use crate::mip::{solve_mip_with, MipOptions, Status};
use crate::model::{from_ticks, State, Time};
use crate::tree::{leaf_encoding, NodeKind, ScenarioTree};
use crate::uncertainty::UncertaintySet;

/// Work done by one adversary-program solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MiloStats {
    pub programs: usize,
    pub bnb_nodes: usize,
    pub solve_time: Duration,
}

/// Optimal adjustable decision at `state` by solving the adversary program.
pub fn solve_ar_milo<T: Time>(set: &UncertaintySet, m: usize, state: &State<T>) -> Result<PolicyDecision> {
    solve_ar_milo_with(set, m, state).map(|r| r.0)
}

/// The root minimum is taken over the scheduler's first choices. Below each
/// choice the adversary maximizes over independent subtrees, and each subtree
/// program is solved with the current best value as a pruning target.
pub fn solve_ar_milo_with<T: Time>(
    set: &UncertaintySet,
    m: usize,
    state: &State<T>,
) -> Result<(PolicyDecision, MiloStats)> {
    let n = set.dim();
    let tree = ScenarioTree::build_from(n, m, &state.started, &state.finished)?;
    let cond = set.condition(state);
    if cond.is_empty() {
        return Err(Error::EmptySet);
    }
    let solver = Solver { tree: &tree, set: &cond.set, m, discrete: set.is_discrete(), stats: MiloStats::default() };
    solver.solve(&state.started)
}

struct Solver<'a> {
    tree: &'a ScenarioTree,
    set: &'a UncertaintySet,
    m: usize,
    discrete: bool,
    stats: MiloStats,
}

impl Solver<'_> {
    /// Values closer than this are ties.
    fn tie(&self) -> f64 {
        if self.discrete {
            from_ticks(1) / 2.0
        } else {
            1e-6
        }
    }

    fn round(&self, v: f64) -> f64 {
        if self.discrete {
            from_ticks((v * crate::model::TICKS_PER_UNIT as f64).round() as i64)
        } else {
            v
        }
    }

    fn solve(mut self, started: &[usize]) -> Result<(PolicyDecision, MiloStats)> {
        let root = self.tree.root().clone();
        let mut best: Option<(f64, usize)> = None;
        for &x in &root.children {
            let limit = best.map(|b| b.0 - self.tie());
            if let Some(v) = self.adversary_value(x, limit)? {
                if best.is_none_or(|b| v < b.0 - self.tie()) {
                    best = Some((v, x));
                }
            }
        }
        let (value, x) = best.ok_or(Error::EmptySet)?;
        let tasks = self.tree.nodes[x].started.iter().copied().filter(|i| !started.contains(i)).collect();
        Ok((PolicyDecision { tasks, value }, self.stats))
    }

    /// Worst case below adversary node `x`; `None` once it provably reaches `limit`.
    fn adversary_value(&mut self, x: usize, limit: Option<f64>) -> Result<Option<f64>> {
        let mut worst = f64::NEG_INFINITY;
        for &c in &self.tree.nodes[x].children.clone() {
            let v = match self.tree.nodes[c].kind {
                NodeKind::Leaf => self.leaf_value(c)?,
                _ => self.subtree_value(c, worst, limit)?,
            };
            if let Some(v) = v {
                worst = worst.max(v);
            }
            if limit.is_some_and(|l| worst >= l) {
                return Ok(None);
            }
        }
        Ok(Some(self.round(worst)))
    }

    /// Largest makespan of a leaf's completion order, `None` if no duration vector realizes it.
    fn leaf_value(&mut self, leaf: usize) -> Result<Option<f64>> {
        let node = &self.tree.nodes[leaf];
        let enc = leaf_encoding(&node.started, &node.finished, self.m)?;
        let gap = if self.discrete { from_ticks(1) } else { 0.0 };
        match self.set.max_linear(&enc.makespan_weights(), &enc.order_constraints(gap)) {
            Ok((v, _)) => Ok(Some(v)),
            Err(Error::EmptySet) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Adversary program below scheduler node `b`. Values at most `floor` do not
    /// matter; values at least `limit` stop the search.
    fn subtree_value(&mut self, b: usize, floor: f64, limit: Option<f64>) -> Result<Option<f64>> {
        let prog = build_subtree_milo(self.tree, b, self.set)?;
        let lb = prog.lower_bound;
        if limit.is_some_and(|l| lb >= l) {
            return Ok(Some(lb));
        }
        let opts = MipOptions { cutoff: Some(floor.max(lb)), target: limit, ..MipOptions::default() };
        let sol = solve_mip_with(&prog.program, &opts)?;
        self.stats.programs += 1;
        self.stats.bnb_nodes += sol.nodes;
        self.stats.solve_time += sol.elapsed;
        match sol.status {
            Status::Optimal => Ok(Some(sol.objective)),
            // nothing above the floor or the committed adversary
            Status::Infeasible => Ok((lb > floor).then_some(lb)),
            Status::Limit if limit.is_some_and(|l| sol.objective >= l) => Ok(Some(sol.objective)),
            Status::Limit => Err(Error::Limit(format!("branch-and-bound node limit after {} nodes", sol.nodes))),
            Status::Unbounded => invalid("adversary program has no finite optimum"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::solve_ar_dp;
    use crate::uncertainty::{BudgetedSet, DiscreteSet};

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

    #[test]
    fn four_task_matches_backward_induction() {
        let (d, stats) = solve_ar_milo_with(&four_task(), 2, &State::<i64>::initial()).unwrap();
        assert_eq!(d.tasks, vec![0, 3]);
        assert_eq!(d.value, 7.5);
        assert_eq!(d, solve_ar_dp(&four_task(), 2, &State::initial()).unwrap());
        assert!(stats.programs > 0);
    }

    #[test]
    fn three_task_budgeted_example() {
        let set = UncertaintySet::Budgeted(
            BudgetedSet::new(vec![0.0580, 0.1945, 0.5866], vec![0.95, 0.75, 0.48], 2.5).unwrap(),
        );
        let d = solve_ar_milo(&set, 2, &State::<f64>::initial()).unwrap();
        assert_eq!(d.tasks, vec![0, 1]);
        assert!((d.value - 1.83).abs() <= 0.005, "{}", d.value);
    }
}
