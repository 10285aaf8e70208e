//! LP-based best-bound branch-and-bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::error::Result;
use crate::mip::program::{MipSolution, Program, Sense, Status};
use crate::mip::simplex::{solve_relaxation, LpStatus};

#[derive(Debug, Clone)]
pub struct MipOptions {
    pub node_limit: usize,
    pub int_tol: f64,
    /// Only solutions strictly better than this value are of interest.
    pub cutoff: Option<f64>,
    /// Stop as soon as an incumbent at least this good is found.
    pub target: Option<f64>,
    pub check_duality: bool,
}

impl Default for MipOptions {
    fn default() -> Self {
        MipOptions { node_limit: 1_000_000, int_tol: 1e-6, cutoff: None, target: None, check_duality: true }
    }
}

struct Node {
    score: f64,
    depth: usize,
    id: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score.total_cmp(&other.score).then(self.depth.cmp(&other.depth)).then(other.id.cmp(&self.id))
    }
}

fn tol(v: f64) -> f64 {
    1e-9 * v.abs().max(1.0)
}

/// Solve the continuous relaxation (integrality ignored).
pub fn solve_lp(p: &Program) -> Result<MipSolution> {
    let start = Instant::now();
    let lo: Vec<f64> = p.vars.iter().map(|v| v.lower).collect();
    let hi: Vec<f64> = p.vars.iter().map(|v| v.upper).collect();
    let r = solve_relaxation(p, &lo, &hi, true)?;
    let status = match r.status {
        LpStatus::Optimal => Status::Optimal,
        LpStatus::Infeasible => Status::Infeasible,
        LpStatus::Unbounded => Status::Unbounded,
    };
    Ok(MipSolution {
        status,
        objective: r.objective,
        bound: r.objective,
        values: r.x,
        nodes: 1,
        lp_iterations: r.iterations,
        max_duality_gap: r.duality_gap,
        elapsed: start.elapsed(),
    })
}

pub fn solve_mip(p: &Program) -> Result<MipSolution> {
    solve_mip_with(p, &MipOptions::default())
}

/// Exact branch-and-bound: best-bound node selection, most-fractional branching.
pub fn solve_mip_with(p: &Program, opt: &MipOptions) -> Result<MipSolution> {
    let start = Instant::now();
    // work with a maximization score internally
    let to_score = |v: f64| if p.sense == Sense::Maximize { v } else { -v };
    let from_score = to_score;
    let mut nodes = 0usize;
    let mut iterations = 0usize;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let floor_score = opt.cutoff.map(to_score);
    let target_score = opt.target.map(to_score);
    let lo: Vec<f64> = p.vars.iter().map(|v| v.lower).collect();
    let hi: Vec<f64> = p.vars.iter().map(|v| v.upper).collect();
    let mut gap: f64 = 0.0;
    let finish = |status, best: Option<(f64, Vec<f64>)>, bound: f64, nodes, iterations, gap| {
        let (objective, values) = match best {
            Some((s, x)) => (from_score(s), x),
            None => (f64::NAN, Vec::new()),
        };
        Ok(MipSolution {
            status,
            objective,
            values,
            bound: from_score(bound),
            nodes,
            lp_iterations: iterations,
            max_duality_gap: gap,
            elapsed: start.elapsed(),
        })
    };
    let root = solve_relaxation(p, &lo, &hi, opt.check_duality)?;
    nodes += 1;
    iterations += root.iterations;
    gap = gap.max(root.duality_gap);
    match root.status {
        LpStatus::Infeasible => return finish(Status::Infeasible, None, f64::NEG_INFINITY, nodes, iterations, gap),
        LpStatus::Unbounded => return finish(Status::Unbounded, None, f64::INFINITY, nodes, iterations, gap),
        LpStatus::Optimal => {}
    }
    let mut heap = BinaryHeap::new();
    let mut next_id = 1usize;
    heap.push(Node { score: to_score(root.objective), depth: 0, id: 0, lo, hi, x: root.x });
    let threshold = |best: &Option<(f64, Vec<f64>)>| {
        let b = best.as_ref().map(|b| b.0).unwrap_or(f64::NEG_INFINITY);
        b.max(floor_score.unwrap_or(f64::NEG_INFINITY))
    };
    while let Some(node) = heap.pop() {
        let thr = threshold(&best);
        if thr.is_finite() && node.score <= thr + tol(thr) {
            heap.clear();
            break;
        }
        // most fractional integer variable, lowest index on ties
        let mut branch = None;
        let mut frac_best = opt.int_tol;
        for (v, var) in p.vars.iter().enumerate() {
            if !var.integer {
                continue;
            }
            let f = node.x[v] - node.x[v].floor();
            let dist = f.min(1.0 - f);
            if dist > frac_best {
                frac_best = dist;
                branch = Some(v);
            }
        }
        let Some(v) = branch else {
            let mut x = node.x;
            for (k, var) in p.vars.iter().enumerate() {
                if var.integer {
                    x[k] = x[k].round();
                }
            }
            best = Some((node.score, x));
            if let Some(t) = target_score {
                if node.score >= t - tol(t) {
                    let bound = heap.peek().map(|n| n.score.max(node.score)).unwrap_or(node.score);
                    return finish(Status::Optimal, best, bound, nodes, iterations, gap).map(|mut s| {
                        if !heap.is_empty() {
                            s.status = Status::Limit;
                        }
                        s
                    });
                }
            }
            continue;
        };
        if nodes >= opt.node_limit {
            let bound = node.score;
            return finish(Status::Limit, best, bound, nodes, iterations, gap);
        }
        let xv = node.x[v];
        for down in [true, false] {
            let mut lo = node.lo.clone();
            let mut hi = node.hi.clone();
            if down {
                hi[v] = xv.floor();
            } else {
                lo[v] = xv.ceil();
            }
            let r = solve_relaxation(p, &lo, &hi, opt.check_duality)?;
            nodes += 1;
            iterations += r.iterations;
            gap = gap.max(r.duality_gap);
            if r.status != LpStatus::Optimal {
                continue;
            }
            let score = to_score(r.objective);
            let thr = threshold(&best);
            if thr.is_finite() && score <= thr + tol(thr) {
                continue;
            }
            heap.push(Node { score, depth: node.depth + 1, id: next_id, lo, hi, x: r.x });
            next_id += 1;
        }
    }
    match best {
        Some(ref b) => {
            let bound = b.0;
            finish(Status::Optimal, best.clone(), bound, nodes, iterations, gap)
        }
        None => finish(Status::Infeasible, None, floor_score.unwrap_or(f64::NEG_INFINITY), nodes, iterations, gap),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mip::program::Relation;

    #[test]
    fn small_lp() {
        let mut p = Program::new(Sense::Maximize);
        let x = p.add_var("x", 0.0, f64::INFINITY, false);
        p.set_objective(x, 1.0);
        p.add_row(vec![(x, 1.0)], Relation::Le, 3.0);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn knapsack() {
        let mut p = Program::new(Sense::Maximize);
        let a = p.add_binary("a");
        let b = p.add_binary("b");
        p.set_objective(a, 3.0);
        p.set_objective(b, 2.0);
        p.add_row(vec![(a, 1.0), (b, 1.0)], Relation::Le, 1.0);
        let s = solve_mip(&p).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-9);
        assert_eq!(s.values, vec![1.0, 0.0]);
    }

    #[test]
    fn degenerate_redundant_equalities() {
        let mut p = Program::new(Sense::Minimize);
        let x = p.add_var("x", 0.0, f64::INFINITY, false);
        let y = p.add_var("y", 0.0, f64::INFINITY, false);
        p.set_objective(x, 1.0);
        p.set_objective(y, 1.0);
        p.add_row(vec![(x, 1.0), (y, 1.0)], Relation::Eq, 2.0);
        p.add_row(vec![(x, 2.0), (y, 2.0)], Relation::Eq, 4.0);
        p.add_row(vec![(x, 1.0), (y, -1.0)], Relation::Eq, 0.0);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-9);
        assert!((s.values[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut p = Program::new(Sense::Maximize);
        let x = p.add_var("x", 0.0, f64::INFINITY, false);
        p.set_objective(x, 1.0);
        assert_eq!(solve_lp(&p).unwrap().status, Status::Unbounded);
        p.add_row(vec![(x, 1.0)], Relation::Ge, 5.0);
        p.add_row(vec![(x, 1.0)], Relation::Le, 4.0);
        assert_eq!(solve_lp(&p).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn free_and_negative_variables() {
        let mut p = Program::new(Sense::Minimize);
        let x = p.add_var("x", f64::NEG_INFINITY, f64::INFINITY, false);
        let y = p.add_var("y", f64::NEG_INFINITY, -1.0, false);
        p.set_objective(x, 1.0);
        p.set_objective(y, -1.0);
        p.add_row(vec![(x, 1.0), (y, -1.0)], Relation::Ge, -3.0);
        let s = solve_lp(&p).unwrap();
        assert!((s.objective + 3.0).abs() < 1e-9, "{s:?}");
    }
}
