//! Builder for the adversary program over a scenario tree.
//!
//! Every node gets a value variable `t` in `[0, ub]`; scheduler nodes take the
//! minimum of their children and adversary nodes the maximum (all children but
//! one may be relaxed through a selector binary `w`). A leaf is worth the
//! makespan of its completion order, or 0 when the chosen durations do not
//! realize that order. Durations of tasks that finished above a scheduler node
//! are shared by every leaf below it, which makes the adversary non-anticipative.
//!
//! Continuous sets model leaf durations explicitly with switched order rows.
//! Discrete sets select one scenario per leaf; order feasibility and makespan
//! are evaluated per scenario up front, and shared durations are tied through
//! one binary per distinct value.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mip::program::{Program, Relation, Sense};
use crate::model::{from_ticks, TIME_TOL};
use crate::tree::{leaf_encoding, LeafEncoding, NodeKind, ScenarioTree};
use crate::uncertainty::UncertaintySet;

/// How the durations of a leaf are represented.
#[derive(Debug, Clone, PartialEq)]
pub enum LeafVars {
    /// One continuous variable per task.
    Durations(Vec<usize>),
    /// (scenario, selector binary) for each scenario realizing the leaf.
    Scenarios(Vec<(usize, usize)>),
}

/// The program together with the variable of every modelled object.
#[derive(Debug, Clone)]
pub struct AdversaryProgram {
    pub program: Program,
    /// Tree node at which the program is rooted.
    pub root: usize,
    /// Value variable per node (`None` outside the subtree).
    pub t: Vec<Option<usize>>,
    pub leaves: Vec<(usize, LeafVars)>,
    /// Order-infeasibility switch per leaf (continuous sets only).
    pub z: Vec<(usize, usize)>,
    /// Relaxation selector per (adversary node, child).
    pub w: Vec<(usize, usize, usize)>,
    /// Value the adversary reaches by committing to one duration vector up front;
    /// attained by some feasible solution.
    pub lower_bound: f64,
    scenarios: Vec<Vec<f64>>,
}

impl AdversaryProgram {
    /// Duration vector of every active leaf in a solution. Discrete leaves
    /// without a selected scenario are switched off and skipped.
    pub fn leaf_durations(&self, x: &[f64]) -> Vec<(usize, Vec<f64>)> {
        self.leaves
            .iter()
            .filter_map(|(leaf, vars)| {
                let d = match vars {
                    LeafVars::Durations(d) => d.iter().map(|&v| x[v]).collect(),
                    LeafVars::Scenarios(y) => {
                        let &(s, _) = y.iter().find(|&&(_, v)| x[v] > 0.5)?;
                        self.scenarios[s].clone()
                    }
                };
                Some((*leaf, d))
            })
            .collect()
    }
}

/// Program whose optimum is the adversary's worst-case makespan over the whole tree.
pub fn build_adversary_milo(tree: &ScenarioTree, set: &UncertaintySet) -> Result<AdversaryProgram> {
    build_subtree_milo(tree, 0, set)
}

/// Same program restricted to the subtree below `root`. Tasks finished at
/// `root` must already be pinned by `set`.
pub fn build_subtree_milo(tree: &ScenarioTree, root: usize, set: &UncertaintySet) -> Result<AdversaryProgram> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if set.dim() != tree.n {
        return Err(Error::InvalidInput(format!("set has dimension {}, tree has {} tasks", set.dim(), tree.n)));
    }
    let n = tree.n;
    let lo: Vec<f64> = (0..n).map(|i| set.coord_min(i)).collect();
    let hi: Vec<f64> = (0..n).map(|i| set.coord_max(i)).collect();
    let scenarios = match set {
        UncertaintySet::Discrete(ds) => (0..ds.scenarios.len()).map(|s| ds.scenario_units(s)).collect(),
        _ => Vec::new(),
    };
    let mut b = Builder {
        tree,
        set,
        p: Program::new(Sense::Maximize),
        lo,
        hi,
        ticks: match set {
            UncertaintySet::Discrete(ds) => ds.scenarios.clone(),
            _ => Vec::new(),
        },
        t: vec![None; tree.nodes.len()],
        leaves: Vec::new(),
        z: Vec::new(),
        w: Vec::new(),
        ub: BTreeMap::new(),
        candidates: Vec::new(),
    };
    b.bound(root);
    let lower_bound = b.committed_value(root);
    let mut ties = Ties::default();
    for &i in &tree.nodes[root].finished {
        b.reveal(root, i, &mut ties);
    }
    let t_root = b.node(root, &mut ties)?;
    b.p.set_objective(t_root, 1.0);
    Ok(AdversaryProgram { program: b.p, root, t: b.t, leaves: b.leaves, z: b.z, w: b.w, lower_bound, scenarios })
}

/// Shared duration of each revealed task: a variable (continuous sets) or one
/// binary per scenario value class (discrete sets).
#[derive(Default, Clone)]
struct Ties {
    shared: BTreeMap<usize, usize>,
    classes: BTreeMap<usize, Vec<(Vec<usize>, usize)>>,
}

struct Builder<'a> {
    tree: &'a ScenarioTree,
    set: &'a UncertaintySet,
    p: Program,
    lo: Vec<f64>,
    hi: Vec<f64>,
    ticks: Vec<Vec<i64>>,
    t: Vec<Option<usize>>,
    leaves: Vec<(usize, LeafVars)>,
    z: Vec<(usize, usize)>,
    w: Vec<(usize, usize, usize)>,
    /// Upper bound on each node value.
    ub: BTreeMap<usize, f64>,
    /// Leaf maximizers, tried as committed adversary choices.
    candidates: Vec<Vec<f64>>,
}

impl Builder<'_> {
    fn discrete(&self) -> bool {
        !self.ticks.is_empty()
    }

    fn encoding(&self, leaf: usize) -> Result<LeafEncoding> {
        let node = &self.tree.nodes[leaf];
        leaf_encoding(&node.started, &node.finished, self.tree.m)
    }

    /// Makespan of scenario `s` at a leaf, or `None` if it does not realize the order.
    fn scenario_value(&self, enc: &LeafEncoding, s: usize) -> Option<f64> {
        let d = &self.ticks[s];
        let dot = |row: &[i32]| row.iter().zip(d).map(|(&a, &v)| a as i64 * v).sum::<i64>();
        let ok =
            enc.rows.iter().zip(&enc.strict).all(|(row, &strict)| if strict { dot(row) < 0 } else { dot(row) <= 0 });
        ok.then(|| from_ticks(dot(&enc.makespan)))
    }

    /// Fill `ub` for the subtree below `id` and return the bound of `id`.
    fn bound(&mut self, id: usize) -> f64 {
        let node = &self.tree.nodes[id];
        let v = match node.kind {
            NodeKind::Leaf => {
                let enc = self.encoding(id).expect("tree leaves are complete histories");
                if self.discrete() {
                    (0..self.ticks.len()).filter_map(|s| self.scenario_value(&enc, s)).fold(0.0, f64::max)
                } else {
                    // an order no duration vector realizes is worth nothing
                    match self.set.max_linear(&enc.makespan_weights(), &enc.order_constraints(0.0)) {
                        Ok((v, d)) => {
                            self.candidates.push(d);
                            v
                        }
                        Err(_) => 0.0,
                    }
                }
            }
            NodeKind::Scheduler => {
                node.children.clone().into_iter().map(|c| self.bound(c)).fold(f64::INFINITY, f64::min)
            }
            NodeKind::Adversary => node.children.clone().into_iter().map(|c| self.bound(c)).fold(0.0, f64::max),
        };
        let v = if v.is_finite() { v } else { 0.0 };
        self.ub.insert(id, v);
        v
    }

    /// Best committed adversary: one duration vector for the whole subtree,
    /// answered by the scheduler's best reaction.
    fn committed_value(&self, root: usize) -> f64 {
        let fixed: Vec<Vec<f64>> = if self.discrete() {
            (0..self.ticks.len()).map(|s| self.ticks[s].iter().map(|&v| from_ticks(v)).collect()).collect()
        } else {
            let mut c = self.candidates.clone();
            c.sort_by(|a, b| {
                a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
            });
            c.dedup();
            c
        };
        let mut best = 0.0f64;
        for (k, d) in fixed.iter().enumerate() {
            if let Some(v) = self.react(root, k, d) {
                best = best.max(v);
            }
        }
        best
    }

    /// Scheduler's best makespan below `id` when durations are `d` (scenario
    /// `k` for discrete sets); `None` if `d` never reaches `id`.
    fn react(&self, id: usize, k: usize, d: &[f64]) -> Option<f64> {
        let node = &self.tree.nodes[id];
        match node.kind {
            NodeKind::Leaf => {
                let enc = self.encoding(id).ok()?;
                if self.discrete() {
                    return self.scenario_value(&enc, k);
                }
                let dot = |row: &[i32]| row.iter().zip(d).map(|(&a, &v)| a as f64 * v).sum::<f64>();
                let ok = enc.rows.iter().zip(&enc.strict).all(|(row, &strict)| {
                    let v = dot(row);
                    if strict {
                        v < -TIME_TOL
                    } else {
                        v <= TIME_TOL
                    }
                });
                ok.then(|| dot(&enc.makespan))
            }
            NodeKind::Scheduler => node.children.iter().filter_map(|&c| self.react(c, k, d)).min_by(f64::total_cmp),
            NodeKind::Adversary => node.children.iter().find_map(|&c| self.react(c, k, d)),
        }
    }

    fn reveal(&mut self, at: usize, task: usize, ties: &mut Ties) {
        if self.discrete() {
            let mut by_value: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
            for (s, sc) in self.ticks.iter().enumerate() {
                by_value.entry(sc[task]).or_default().push(s);
            }
            if by_value.len() > 1 {
                let mut classes = Vec::new();
                let mut sum = Vec::new();
                for (value, members) in by_value {
                    let v = self.p.add_binary(format!("v_{at}_{}_{}", task + 1, value));
                    sum.push((v, 1.0));
                    classes.push((members, v));
                }
                self.p.add_row(sum, Relation::Eq, 1.0);
                ties.classes.insert(task, classes);
            }
        } else {
            let v = self.p.add_var(
                format!("d_{at}_{}", task + 1),
                self.lo[task] - TIME_TOL,
                self.hi[task] + TIME_TOL,
                false,
            );
            ties.shared.insert(task, v);
        }
    }

    /// Model node `id` and return its value variable.
    fn node(&mut self, id: usize, ties: &mut Ties) -> Result<usize> {
        let node = &self.tree.nodes[id];
        let ub = self.ub[&id];
        let t = self.p.add_var(format!("t_{id}"), 0.0, ub, false);
        self.t[id] = Some(t);
        match node.kind {
            NodeKind::Scheduler => {
                for &c in &node.children {
                    let tc = self.node(c, ties)?;
                    self.p.add_row(vec![(t, 1.0), (tc, -1.0)], Relation::Le, 0.0);
                }
            }
            NodeKind::Adversary => {
                let mut selectors = Vec::new();
                for &c in &node.children {
                    let child = &self.tree.nodes[c];
                    let tc = match child.kind {
                        NodeKind::Leaf => self.leaf(c, ties)?,
                        _ => {
                            // the task that just finished is revealed to the scheduler below
                            let l = *child.finished.last().expect("scheduler child records a completion");
                            let mut below = ties.clone();
                            self.reveal(c, l, &mut below);
                            self.node(c, &mut below)?
                        }
                    };
                    let w = self.p.add_binary(format!("w_{id}_{c}"));
                    self.w.push((id, c, w));
                    selectors.push(w);
                    self.p.add_row(vec![(t, 1.0), (tc, -1.0), (w, -ub)], Relation::Le, 0.0);
                }
                let k = selectors.len() as f64;
                self.p.add_row(selectors.into_iter().map(|w| (w, 1.0)).collect(), Relation::Le, k - 1.0);
            }
            NodeKind::Leaf => unreachable!("leaves are modelled by their parent"),
        }
        Ok(t)
    }

    fn leaf(&mut self, id: usize, ties: &Ties) -> Result<usize> {
        let enc = self.encoding(id)?;
        let ub = self.ub[&id];
        let t = self.p.add_var(format!("t_{id}"), 0.0, ub, false);
        self.t[id] = Some(t);
        if self.discrete() {
            // only scenarios that realize this completion order can be chosen;
            // choosing none switches the leaf off
            let mut y = Vec::new();
            let mut row = vec![(t, 1.0)];
            for s in 0..self.ticks.len() {
                if let Some(v) = self.scenario_value(&enc, s) {
                    let ys = self.p.add_binary(format!("y_{id}_{}", s + 1));
                    row.push((ys, -v));
                    y.push((s, ys));
                }
            }
            self.p.add_row(row, Relation::Le, 0.0);
            if !y.is_empty() {
                self.p.add_row(y.iter().map(|&(_, v)| (v, 1.0)).collect(), Relation::Le, 1.0);
            }
            for classes in ties.classes.values() {
                for (members, v) in classes {
                    let mut row: Vec<(usize, f64)> =
                        y.iter().filter(|(s, _)| members.contains(s)).map(|&(_, ys)| (ys, 1.0)).collect();
                    if !row.is_empty() {
                        row.push((*v, -1.0));
                        self.p.add_row(row, Relation::Le, 0.0);
                    }
                }
            }
            self.leaves.push((id, LeafVars::Scenarios(y)));
            return Ok(t);
        }
        let d: Vec<usize> = (0..self.tree.n)
            .map(|i| match ties.shared.get(&i) {
                Some(&v) => v,
                None => {
                    self.p.add_var(format!("d_{id}_{}", i + 1), self.lo[i] - TIME_TOL, self.hi[i] + TIME_TOL, false)
                }
            })
            .collect();
        self.set.embed(&mut self.p, &d, &format!("u_{id}"))?;
        let z = self.p.add_binary(format!("z_{id}"));
        for row in &enc.rows {
            // largest violation of the row over the coordinate bounds
            let reach: f64 = row
                .iter()
                .enumerate()
                .map(|(i, &a)| if a > 0 { a as f64 * self.hi[i] } else { a as f64 * self.lo[i] })
                .sum();
            let mut coeffs: Vec<(usize, f64)> =
                row.iter().enumerate().filter(|(_, &a)| a != 0).map(|(i, &a)| (d[i], a as f64)).collect();
            coeffs.push((z, -reach.max(0.0)));
            self.p.add_row(coeffs, Relation::Le, 0.0);
        }
        // t <= e.d and t <= ub (1 - z)
        let mut row = vec![(t, 1.0)];
        row.extend(enc.makespan.iter().enumerate().filter(|(_, &a)| a != 0).map(|(i, &a)| (d[i], -(a as f64))));
        self.p.add_row(row, Relation::Le, 0.0);
        self.p.add_row(vec![(t, 1.0), (z, ub)], Relation::Le, ub);
        self.leaves.push((id, LeafVars::Durations(d)));
        self.z.push((id, z));
        Ok(t)
    }
}
