//! Scenario tree of scheduler and adversary decisions over (started, finished) histories.

use std::fmt::Write as _;

use itertools::Itertools;

use crate::error::{invalid, Error, Result};
use crate::mip::Relation;
use crate::uncertainty::LinearConstraint;

/// Largest tree materialized before a capacity error.
pub const MAX_NODES: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Scheduler,
    Adversary,
    Leaf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub id: usize,
    pub kind: NodeKind,
    pub started: Vec<usize>,
    pub finished: Vec<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Completion-order constraints of a leaf: `rows[k] . d <= 0` (strictly below
/// zero when `strict[k]`), and `makespan . d` is the last completion time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafEncoding {
    pub rows: Vec<Vec<i32>>,
    pub strict: Vec<bool>,
    pub makespan: Vec<i32>,
    pub last_task: usize,
}

impl LeafEncoding {
    /// Order rows as constraints on a duration vector; strict rows keep a margin of `gap`.
    pub fn order_constraints(&self, gap: f64) -> Vec<LinearConstraint> {
        self.rows
            .iter()
            .zip(&self.strict)
            .map(|(row, &strict)| {
                let coeffs = row.iter().enumerate().filter(|(_, &a)| a != 0).map(|(i, &a)| (i, a as f64)).collect();
                LinearConstraint::new(coeffs, Relation::Le, if strict { -gap } else { 0.0 })
            })
            .collect()
    }

    pub fn makespan_weights(&self) -> Vec<f64> {
        self.makespan.iter().map(|&a| a as f64).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioTree {
    pub n: usize,
    pub m: usize,
    pub nodes: Vec<TreeNode>,
}

/// Node counts by kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NodeCounts {
    pub scheduler: u128,
    pub adversary: u128,
    pub leaves: u128,
}

impl NodeCounts {
    pub fn total(&self) -> u128 {
        self.scheduler + self.adversary + self.leaves
    }
}

fn factorial(k: usize) -> u128 {
    (1..=k as u128).product()
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k as u128).fold(1, |acc, i| acc * (n as u128 - i) / (i + 1))
}

/// Counts below an adversary node with `u` unstarted and `r` running tasks.
fn count_adversary(u: usize, r: usize) -> NodeCounts {
    match u {
        0 => NodeCounts { adversary: 1, leaves: factorial(r), ..Default::default() },
        1 => NodeCounts { adversary: 1, leaves: r as u128 * factorial(r), ..Default::default() },
        _ => {
            let sub = count_adversary(u - 1, r);
            let branches = r as u128 * u as u128;
            NodeCounts {
                scheduler: r as u128 + branches * sub.scheduler,
                adversary: 1 + branches * sub.adversary,
                leaves: branches * sub.leaves,
            }
        }
    }
}

/// Counts of the tree rooted at a scheduler node with `u` unstarted tasks,
/// `r` running tasks and `m` machines.
fn count_from(u: usize, r: usize, m: usize) -> NodeCounts {
    let k = (m - r).min(u);
    let sub = count_adversary(u - k, r + k);
    let c = binomial(u, k);
    NodeCounts { scheduler: 1 + c * sub.scheduler, adversary: c * sub.adversary, leaves: c * sub.leaves }
}

/// Closed-form scheduler-node and leaf counts of the full tree for (n, m).
pub fn count_states(n: usize, m: usize) -> Result<(u128, u128)> {
    if m < 2 || n <= m {
        return invalid(format!("need n > m >= 2, got n={n}, m={m}"));
    }
    let overflow = || Error::Capacity(format!("state count for n={n}, m={m} overflows 128 bits"));
    let mut sched: u128 = 1;
    let mut falling: u128 = 1;
    let mut power: u128 = 1;
    let choose = binomial(n, m);
    for i in 1..n - m {
        power = power.checked_mul(m as u128).ok_or_else(overflow)?;
        if i > 1 {
            falling = falling.checked_mul((n - m - i + 2) as u128).ok_or_else(overflow)?;
        }
        // n!/m! * m^i / (n-m-i+1)! = C(n,m) * (n-m)!/(n-m-i+1)! * m^i
        let term = choose.checked_mul(falling).and_then(|v| v.checked_mul(power)).ok_or_else(overflow)?;
        sched = sched.checked_add(term).ok_or_else(overflow)?;
    }
    let leaves = (1..=n as u128)
        .try_fold(1u128, |acc, k| acc.checked_mul(k))
        .and_then(|f| (0..n - m).try_fold(f, |acc, _| acc.checked_mul(m as u128)))
        .ok_or_else(overflow)?;
    Ok((sched, leaves))
}

impl ScenarioTree {
    /// Full tree for `n` tasks on `m` machines, rooted at the empty schedule.
    pub fn build(n: usize, m: usize) -> Result<Self> {
        if m < 2 || n <= m {
            return invalid(format!("need n > m >= 2, got n={n}, m={m}"));
        }
        Self::build_from(n, m, &[], &[])
    }

    /// Tree rooted at a scheduler decision after the history (`started`, `finished`).
    pub fn build_from(n: usize, m: usize, started: &[usize], finished: &[usize]) -> Result<Self> {
        let running = started.len().checked_sub(finished.len()).filter(|&r| r < m);
        let Some(running) = running else {
            return invalid("no idle machine at the root state");
        };
        if started.iter().any(|&i| i >= n) || started.iter().unique().count() != started.len() {
            return invalid("started list must hold distinct task ids below n");
        }
        if finished.iter().any(|f| !started.contains(f)) {
            return invalid("finished tasks must be started");
        }
        let unstarted: Vec<usize> = (0..n).filter(|i| !started.contains(i)).collect();
        if unstarted.is_empty() {
            return invalid("no task left to schedule");
        }
        let counts = count_from(unstarted.len(), running, m);
        if counts.total() > MAX_NODES {
            let (d, l) = count_states(n, m).unwrap_or((counts.scheduler, counts.leaves));
            return Err(Error::Capacity(format!(
                "tree for n={n}, m={m} needs {} nodes ({} scheduler, {} leaves in the full tree: {d} and {l})",
                counts.total(),
                counts.scheduler,
                counts.leaves
            )));
        }
        let mut tree = ScenarioTree { n, m, nodes: Vec::with_capacity(counts.total() as usize) };
        let root = tree.push(NodeKind::Scheduler, started.to_vec(), finished.to_vec(), None);
        let k = (m - running).min(unstarted.len());
        for batch in unstarted.iter().copied().combinations(k) {
            let mut s = started.to_vec();
            s.extend(batch);
            tree.grow_adversary(s, finished.to_vec(), root);
        }
        Ok(tree)
    }

    fn push(&mut self, kind: NodeKind, started: Vec<usize>, finished: Vec<usize>, parent: Option<usize>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode { id, kind, started, finished, parent, children: Vec::new() });
        if let Some(p) = parent {
            self.nodes[p].children.push(id);
        }
        id
    }

    fn grow_adversary(&mut self, started: Vec<usize>, finished: Vec<usize>, parent: usize) {
        let running: Vec<usize> = started.iter().copied().filter(|i| !finished.contains(i)).collect();
        let unstarted: Vec<usize> = (0..self.n).filter(|i| !started.contains(i)).collect();
        let id = self.push(NodeKind::Adversary, started.clone(), finished.clone(), Some(parent));
        if unstarted.len() <= 1 {
            // no decision left: the adversary fixes the whole remaining completion order
            let mut s = started.clone();
            s.extend(&unstarted);
            if unstarted.is_empty() {
                for order in running.iter().copied().permutations(running.len()) {
                    let mut f = finished.clone();
                    f.extend(order);
                    self.push(NodeKind::Leaf, s.clone(), f, Some(id));
                }
            } else {
                for &l in &running {
                    let rest: Vec<usize> =
                        running.iter().copied().filter(|&i| i != l).chain(unstarted.iter().copied()).collect();
                    for order in rest.iter().copied().permutations(rest.len()) {
                        let mut f = finished.clone();
                        f.push(l);
                        f.extend(order);
                        self.push(NodeKind::Leaf, s.clone(), f, Some(id));
                    }
                }
            }
            return;
        }
        for &l in &running {
            let mut f = finished.clone();
            f.push(l);
            let sched = self.push(NodeKind::Scheduler, started.clone(), f.clone(), Some(id));
            for &k in &unstarted {
                let mut s = started.clone();
                s.push(k);
                self.grow_adversary(s, f.clone(), sched);
            }
        }
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn counts(&self) -> NodeCounts {
        let mut c = NodeCounts::default();
        for node in &self.nodes {
            match node.kind {
                NodeKind::Scheduler => c.scheduler += 1,
                NodeKind::Adversary => c.adversary += 1,
                NodeKind::Leaf => c.leaves += 1,
            }
        }
        c
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Leaf)
    }

    /// Scheduler ancestors of `id` from the root down, including `id` if it is one.
    fn scheduler_path(&self, id: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut cur = Some(id);
        while let Some(c) = cur {
            if self.nodes[c].kind == NodeKind::Scheduler {
                path.push(c);
            }
            cur = self.nodes[c].parent;
        }
        path.reverse();
        path
    }

    /// Deepest scheduler node above both leaves and the finished tasks at that
    /// node, whose durations both leaves must share.
    pub fn last_common_ancestor(&self, a: usize, b: usize) -> (usize, Vec<usize>) {
        if a == b {
            let f = self.nodes[a].finished.clone();
            let anc = self.scheduler_path(a).pop().unwrap_or(0);
            return (anc, f);
        }
        let pa = self.scheduler_path(a);
        let pb = self.scheduler_path(b);
        let anc = pa.iter().zip(&pb).take_while(|(x, y)| x == y).last().map(|(x, _)| *x).unwrap_or(0);
        (anc, self.nodes[anc].finished.clone())
    }

    /// Deterministic line-oriented dump: `id kind parent started finished`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let list = |v: &[usize]| v.iter().map(|i| (i + 1).to_string()).join(",");
        for node in &self.nodes {
            let kind = match node.kind {
                NodeKind::Scheduler => "D",
                NodeKind::Adversary => "N",
                NodeKind::Leaf => "L",
            };
            let parent = node.parent.map_or("-".to_string(), |p| p.to_string());
            let _ = writeln!(s, "{} {} {} [{}] [{}]", node.id, kind, parent, list(&node.started), list(&node.finished));
        }
        s
    }
}

/// Replay a complete history: the first `m` started tasks begin at time zero and
/// each later task starts when the next task of `finished` completes.
pub fn leaf_encoding(started: &[usize], finished: &[usize], m: usize) -> Result<LeafEncoding> {
    let n = started.len();
    if finished.len() != n || finished.iter().any(|f| !started.contains(f)) {
        return invalid("a leaf must have every started task finished");
    }
    // completion time of each task as an integer combination of durations
    let mut completion: Vec<Option<Vec<i32>>> = vec![None; n.max(started.iter().max().map_or(0, |v| v + 1))];
    let dim = completion.len();
    let unit = |i: usize| {
        let mut v = vec![0; dim];
        v[i] = 1;
        v
    };
    let mut running: Vec<usize> = Vec::new();
    let mut next = 0;
    while next < started.len().min(m) {
        let i = started[next];
        completion[i] = Some(unit(i));
        running.push(i);
        next += 1;
    }
    let mut rows = Vec::new();
    let mut strict = Vec::new();
    for &f in finished {
        let Some(pos) = running.iter().position(|&r| r == f) else {
            return invalid(format!("task {f} finishes before it starts"));
        };
        running.remove(pos);
        let cf = completion[f].clone().expect("running tasks have completion times");
        for &o in &running {
            let co = completion[o].as_ref().expect("running tasks have completion times");
            rows.push(cf.iter().zip(co).map(|(a, b)| a - b).collect());
            strict.push(f > o);
        }
        if next < started.len() {
            let i = started[next];
            let mut c = cf.clone();
            c[i] += 1;
            completion[i] = Some(c);
            running.push(i);
            next += 1;
        }
    }
    let last_task = *finished.last().ok_or_else(|| Error::InvalidInput("empty leaf".into()))?;
    let makespan = completion[last_task].clone().expect("finished tasks have completion times");
    Ok(LeafEncoding { rows, strict, makespan, last_task })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enumerate_leaves(n: usize, m: usize) -> usize {
        // every start order with the first m ascending, every completion order
        // consistent with list scheduling, counted by brute force
        let mut count = 0;
        for s in (0..n).permutations(n) {
            if !s[..m].windows(2).all(|w| w[0] < w[1]) {
                continue;
            }
            for f in (0..n).permutations(n) {
                if leaf_encoding(&s, &f, m).is_ok() {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn root_fan_out_and_counts() {
        let t = ScenarioTree::build(4, 2).unwrap();
        assert_eq!(t.root().children.len(), 6);
        let c = t.counts();
        assert_eq!((c.scheduler, c.leaves), count_states(4, 2).unwrap());
        assert_eq!(c.leaves, 96);
        for (n, m) in [(3, 2), (4, 2), (5, 2), (5, 3), (6, 2), (6, 3)] {
            let t = ScenarioTree::build(n, m).unwrap();
            let c = t.counts();
            assert_eq!((c.scheduler, c.leaves), count_states(n, m).unwrap(), "n={n} m={m}");
            assert_eq!(c, count_from(n, 0, m));
        }
        assert_eq!(count_states(3, 2).unwrap().0, 1);
    }

    #[test]
    fn leaves_match_brute_force_histories() {
        for (n, m) in [(3, 2), (4, 2), (4, 3), (5, 2)] {
            let t = ScenarioTree::build(n, m).unwrap();
            assert_eq!(t.counts().leaves as usize, enumerate_leaves(n, m), "n={n} m={m}");
        }
    }

    #[test]
    fn encodings_match_the_worked_example() {
        let e = leaf_encoding(&[0, 1, 2, 3], &[0, 2, 1, 3], 2).unwrap();
        assert_eq!(e.rows, vec![vec![1, -1, 0, 0], vec![1, -1, 1, 0], vec![-1, 1, -1, -1]]);
        assert_eq!(e.makespan, vec![1, 0, 1, 1]);
        let e = leaf_encoding(&[0, 1], &[0, 1], 2).unwrap();
        assert_eq!(e.rows, vec![vec![1, -1]]);
        assert_eq!(e.makespan, vec![0, 1]);
        let e = leaf_encoding(&[0, 1, 2, 3], &[0, 1, 2, 3], 2).unwrap();
        assert_eq!(e.makespan, vec![0, 1, 0, 1]);
        assert_eq!(e.rows.len(), 3);
    }

    #[test]
    fn tie_sets() {
        let t = ScenarioTree::build(4, 2).unwrap();
        let find = |s: &[usize], f: &[usize]| t.leaves().find(|l| l.started == s && l.finished == f).unwrap().id;
        let a = find(&[0, 1, 2, 3], &[0, 2, 1, 3]);
        let b = find(&[0, 1, 2, 3], &[0, 2, 3, 1]);
        assert_eq!(t.last_common_ancestor(a, b).1, vec![0]);
        assert_eq!(t.last_common_ancestor(a, a).1, vec![0, 2, 1, 3]);
        let c = find(&[0, 2, 1, 3], &[0, 2, 1, 3]);
        assert_eq!(t.last_common_ancestor(a, c), (0, vec![]));
    }

    #[test]
    fn capacity_guard() {
        assert!(matches!(ScenarioTree::build(12, 2), Err(Error::Capacity(_))));
        assert!(ScenarioTree::build(2, 2).is_err());
    }

    #[test]
    fn tree_from_a_state() {
        // tasks 0 and 1 started, 0 finished: the root decides the third task
        let t = ScenarioTree::build_from(4, 2, &[0, 1], &[0]).unwrap();
        assert_eq!(t.root().children.len(), 2);
        assert_eq!(t.counts(), count_from(2, 1, 2));
        for l in t.leaves() {
            assert_eq!(&l.started[..2], &[0, 1]);
            assert_eq!(l.finished[0], 0);
        }
    }

    #[test]
    fn dump_lists_every_node() {
        let t = ScenarioTree::build(3, 2).unwrap();
        let d = t.dump();
        assert_eq!(d.lines().count(), t.nodes.len());
        assert!(d.starts_with("0 D - [] []"));
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::mip::{solve_lp, Program, Relation, Sense, Status};
    use crate::model::{simulate_list, Permutation};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn every_leaf_is_realizable(n in 3usize..6, m in 2usize..4, pick in 0usize..100_000) {
            prop_assume!(n > m);
            let t = ScenarioTree::build(n, m).unwrap();
            let leaves: Vec<&TreeNode> = t.leaves().collect();
            let leaf = leaves[pick % leaves.len()];
            let e = leaf_encoding(&leaf.started, &leaf.finished, m).unwrap();
            if m == 2 {
                prop_assert_eq!(e.rows.len(), n - 1);
            }
            // durations >= 1 with every completion-order row strictly satisfied
            let mut p = Program::new(Sense::Minimize);
            let d: Vec<usize> = (0..n).map(|i| p.add_var(format!("d{i}"), 1.0, f64::INFINITY, false)).collect();
            for row in &e.rows {
                p.add_row(row.iter().enumerate().map(|(i, &a)| (d[i], a as f64)).collect(), Relation::Le, -1.0);
            }
            for &v in &d {
                p.set_objective(v, 1.0);
            }
            let sol = solve_lp(&p).unwrap();
            prop_assert_eq!(sol.status, Status::Optimal);
            let dur: Vec<f64> = d.iter().map(|&v| sol.values[v]).collect();
            let perm = Permutation::new(leaf.started.clone()).unwrap();
            let (_, span) = simulate_list(&perm, &dur, m).unwrap();
            let enc: f64 = e.makespan.iter().zip(&dur).map(|(a, b)| *a as f64 * b).sum();
            prop_assert!((span - enc).abs() < 1e-6);
        }

        #[test]
        fn tie_sets_are_symmetric_and_nested(n in 3usize..6, a in 0usize..10_000, b in 0usize..10_000, c in 0usize..10_000) {
            let t = ScenarioTree::build(n, 2).unwrap();
            let leaves: Vec<usize> = t.leaves().map(|l| l.id).collect();
            let (a, b, c) = (leaves[a % leaves.len()], leaves[b % leaves.len()], leaves[c % leaves.len()]);
            prop_assert_eq!(t.last_common_ancestor(a, b), t.last_common_ancestor(b, a));
            let (_, fab) = t.last_common_ancestor(a, b);
            let (_, fac) = t.last_common_ancestor(a, c);
            // both ancestors lie on the root path of a, so the tie sets are nested
            if fab.len() >= fac.len() {
                prop_assert!(fac.iter().all(|i| fab.contains(i)));
            } else {
                prop_assert!(fab.iter().all(|i| fac.contains(i)));
            }
        }
    }
}
