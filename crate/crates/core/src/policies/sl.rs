use itertools::Itertools;

use crate::error::{invalid, Error, Result};
use crate::model::{from_ticks, simulate_list_from, State, Time};
use crate::uncertainty::UncertaintySet;

const MAX_REMAINING: usize = 8;

/// Priority order over the unstarted tasks and its worst-case makespan.
#[derive(Debug, Clone, PartialEq)]
pub struct SlPlan {
    pub order: Vec<usize>,
    pub value: f64,
}

fn scenarios<T: Time>(set: &UncertaintySet, state: &State<T>) -> Result<Vec<Vec<i64>>> {
    let UncertaintySet::Discrete(_) = set else {
        return Err(Error::UnsupportedSet("list policies are optimized over discrete scenario sets only".into()));
    };
    let UncertaintySet::Discrete(ds) = set.condition(state).set else { unreachable!("conditioning keeps the kind") };
    if ds.scenarios.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(ds.scenarios)
}

/// Worst-case makespan of continuing with list `order` from `state`.
pub fn list_worst_case<T: Time>(set: &UncertaintySet, m: usize, state: &State<T>, order: &[usize]) -> Result<f64> {
    let mut expected = state.unstarted(set.dim());
    let mut given = order.to_vec();
    expected.sort_unstable();
    given.sort_unstable();
    if expected != given {
        return invalid("the list must order exactly the unstarted tasks");
    }
    let sc = scenarios(set, state)?;
    let s = state.map(|v| v.ticks());
    Ok(from_ticks(sc.iter().map(|d| simulate_list_from(&s, order, d, m)).max().expect("nonempty")))
}

/// Optimal list policy from `state`: the lexicographically first permutation
/// of the unstarted tasks with the smallest worst-case makespan.
pub fn solve_sl<T: Time>(set: &UncertaintySet, m: usize, state: &State<T>) -> Result<SlPlan> {
    let sc = scenarios(set, state)?;
    let remaining = state.unstarted(set.dim());
    if remaining.len() > MAX_REMAINING {
        return Err(Error::Capacity(format!("list enumeration supports at most {MAX_REMAINING} unstarted tasks")));
    }
    let s = state.map(|v| v.ticks());
    let mut best: Option<(i64, Vec<usize>)> = None;
    let k = remaining.len();
    for order in remaining.into_iter().permutations(k) {
        let mut worst = i64::MIN;
        for d in &sc {
            worst = worst.max(simulate_list_from(&s, &order, d, m));
            if best.as_ref().is_some_and(|b| worst >= b.0) {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| worst < b.0) {
            best = Some((worst, order));
        }
    }
    let (v, order) = best.expect("at least the empty permutation");
    Ok(SlPlan { order, value: from_ticks(v) })
}
