use std::collections::{BTreeMap, HashMap};

use itertools::Itertools;

use super::PolicyDecision;
use crate::error::{invalid, Error, Result};
use crate::model::{from_ticks, State};
use crate::uncertainty::UncertaintySet;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Node {
    started: u64,
    /// (task, start time), sorted by task
    running: Vec<(usize, i64)>,
    clock: i64,
}

struct Dp<'a> {
    scenarios: &'a [Vec<i64>],
    n: usize,
    m: usize,
    memo: HashMap<(Node, u64), i64>,
}

impl Dp<'_> {
    fn choices(&self, node: &Node) -> Vec<Vec<usize>> {
        let unstarted: Vec<usize> = (0..self.n).filter(|&i| node.started & (1 << i) == 0).collect();
        let k = (self.m - node.running.len()).min(unstarted.len());
        if k == 0 {
            return Vec::new();
        }
        unstarted.into_iter().combinations(k).collect()
    }

    fn start(node: &Node, tasks: &[usize]) -> Node {
        let mut next = node.clone();
        for &i in tasks {
            next.started |= 1 << i;
            next.running.push((i, node.clock));
        }
        next.running.sort_unstable();
        next
    }

    /// Worst-case makespan from a scheduler decision point.
    fn schedule(&mut self, node: &Node, subset: u64) -> i64 {
        let choices = self.choices(node);
        if choices.is_empty() {
            return self.adversary(node, subset);
        }
        let key = (node.clone(), subset);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let v = choices.iter().map(|c| self.adversary(&Self::start(node, c), subset)).min().expect("nonempty");
        self.memo.insert(key, v);
        v
    }

    /// The adversary picks the next completion event among those some scenario produces.
    fn adversary(&mut self, node: &Node, subset: u64) -> i64 {
        if node.running.is_empty() {
            return node.clock;
        }
        let mut events: BTreeMap<(usize, i64), u64> = BTreeMap::new();
        for s in (0..self.scenarios.len()).filter(|s| subset & (1 << s) != 0) {
            let d = &self.scenarios[s];
            let (c, l) = node.running.iter().map(|&(i, st)| (st + d[i], i)).min().expect("running tasks");
            *events.entry((l, c)).or_default() |= 1 << s;
        }
        let mut worst = i64::MIN;
        for ((l, c), mask) in events {
            let mut next = node.clone();
            next.running.retain(|r| r.0 != l);
            next.clock = c;
            worst = worst.max(self.schedule(&next, mask));
        }
        worst
    }
}

/// Exact min-max decision for a discrete scenario set by backward induction.
pub fn solve_ar_dp(set: &UncertaintySet, m: usize, state: &State<i64>) -> Result<PolicyDecision> {
    let UncertaintySet::Discrete(ds) = set else {
        return Err(Error::UnsupportedSet("backward induction needs a discrete scenario set".into()));
    };
    let n = set.dim();
    if ds.scenarios.len() > 64 || n > 64 {
        return Err(Error::Capacity("backward induction supports at most 64 scenarios and tasks".into()));
    }
    let subset = (0..ds.scenarios.len())
        .filter(|&s| {
            let sc = &ds.scenarios[s];
            state.finished.iter().zip(&state.realized).all(|(&i, &v)| sc[i] == v)
                && state.running.iter().all(|&(i, e)| sc[i] >= e)
        })
        .fold(0u64, |acc, s| acc | (1 << s));
    if subset == 0 {
        return Err(Error::EmptySet);
    }
    let mut running: Vec<(usize, i64)> = state.running.iter().map(|&(i, e)| (i, state.clock - e)).collect();
    running.sort_unstable();
    let root = Node { started: state.started.iter().fold(0, |acc, &i| acc | (1 << i)), running, clock: state.clock };
    let mut dp = Dp { scenarios: &ds.scenarios, n, m, memo: HashMap::new() };
    let choices = dp.choices(&root);
    if choices.is_empty() {
        return invalid("no scheduling decision at this state");
    }
    let mut best: Option<(i64, Vec<usize>)> = None;
    for c in choices {
        let v = dp.adversary(&Dp::start(&root, &c), subset);
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, c));
        }
    }
    let (v, tasks) = best.expect("at least one choice");
    Ok(PolicyDecision { tasks, value: from_ticks(v) })
}
