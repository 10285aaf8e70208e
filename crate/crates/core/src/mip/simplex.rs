//! Dense bounded-variable primal simplex with a two-phase start.

use crate::error::{Error, Result};
use crate::mip::program::{Program, Relation, Sense};

const INF: f64 = f64::INFINITY;
const PIVOT_TOL: f64 = 1e-9;
const MIN_PIVOT: f64 = 1e-11;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const DUALITY_TOL: f64 = 1e-6;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub(crate) struct LpResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Primal-dual objective gap relative to max(|objective|, 1).
    pub duality_gap: f64,
}

/// How an original variable maps onto internal nonnegative columns.
#[derive(Debug, Clone, Copy)]
enum ColMap {
    /// x = offset + col
    Shift(usize, f64),
    /// x = offset - col
    Flip(usize, f64),
    /// x = pos - neg
    Split(usize, usize),
}

struct Tableau {
    rows: usize,
    cols: usize,
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    at_upper: Vec<bool>,
    is_basic: Vec<bool>,
    ub: Vec<f64>,
    iterations: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.cols + j]
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.cols..(i + 1) * self.cols];
                for (dj, a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, j: usize, d: &mut [f64]) {
        let cols = self.cols;
        let p = self.t[r * cols + j];
        {
            let row = &mut self.t[r * cols..(r + 1) * cols];
            for a in row.iter_mut() {
                *a /= p;
            }
            row[j] = 1.0;
        }
        let pivot_row: Vec<f64> = self.t[r * cols..(r + 1) * cols].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * cols + j];
            if f != 0.0 {
                let row = &mut self.t[i * cols..(i + 1) * cols];
                for (a, &b) in row.iter_mut().zip(&pivot_row) {
                    *a -= f * b;
                }
                row[j] = 0.0;
            }
        }
        let f = d[j];
        if f != 0.0 {
            for (a, &b) in d.iter_mut().zip(&pivot_row) {
                *a -= f * b;
            }
            d[j] = 0.0;
        }
        self.is_basic[self.basis[r]] = false;
        self.basis[r] = j;
        self.is_basic[j] = true;
        self.at_upper[j] = false;
    }

    /// Minimize `cost` from the current basic feasible solution.
    fn optimize(&mut self, cost: &[f64], max_iter: usize) -> Result<LpStatus> {
        let mut d = self.reduced_costs(cost);
        let mut degenerate = 0usize;
        loop {
            if self.iterations > max_iter {
                return Err(Error::Numerical("simplex iteration limit".into()));
            }
            let bland = degenerate >= DEGENERATE_RUN;
            // pricing
            let mut enter = None;
            let mut best = 0.0;
            for j in 0..self.cols {
                if self.is_basic[j] || self.ub[j] <= 0.0 {
                    continue;
                }
                let gain = if self.at_upper[j] { d[j] } else { -d[j] };
                if gain > COST_TOL {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if gain > best {
                        best = gain;
                        enter = Some(j);
                    }
                }
            }
            let Some(j) = enter else { return Ok(LpStatus::Optimal) };
            let dir = if self.at_upper[j] { -1.0 } else { 1.0 };
            // ratio test
            let mut theta = self.ub[j];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_mag = 0.0;
            for i in 0..self.rows {
                let a = dir * self.at(i, j);
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let (ratio, to_upper) = if a > 0.0 {
                    (self.beta[i].max(0.0) / a, false)
                } else if self.ub[b].is_finite() {
                    ((self.ub[b] - self.beta[i]).max(0.0) / -a, true)
                } else {
                    continue;
                };
                let take = if ratio < theta - 1e-12 {
                    true
                } else if ratio <= theta + 1e-12 {
                    match leave {
                        None => false,
                        Some((li, _)) if bland => b < self.basis[li],
                        Some(_) => a.abs() > leave_mag,
                    }
                } else {
                    false
                };
                if take {
                    theta = theta.min(ratio);
                    leave = Some((i, to_upper));
                    leave_mag = a.abs();
                }
            }
            if !theta.is_finite() {
                return Ok(LpStatus::Unbounded);
            }
            self.iterations += 1;
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for i in 0..self.rows {
                let a = self.at(i, j);
                if a != 0.0 {
                    self.beta[i] -= dir * theta * a;
                }
            }
            match leave {
                Some((r, to_upper)) => {
                    if leave_mag < MIN_PIVOT {
                        return Err(Error::Numerical(format!("pivot magnitude {leave_mag:e}")));
                    }
                    let entering_value = if self.at_upper[j] { self.ub[j] - theta } else { theta };
                    let out = self.basis[r];
                    self.pivot(r, j, &mut d);
                    self.beta[r] = entering_value;
                    self.at_upper[out] = to_upper;
                }
                None => {
                    // bound flip of the entering column
                    self.at_upper[j] = !self.at_upper[j];
                }
            }
        }
    }
}

/// Solve the LP relaxation of `p` with the given variable bounds.
pub(crate) fn solve_relaxation(p: &Program, lo: &[f64], hi: &[f64], check_duality: bool) -> Result<LpResult> {
    let nv = p.vars.len();
    let sign = match p.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let infeasible = |iterations| LpResult {
        status: LpStatus::Infeasible,
        x: Vec::new(),
        objective: f64::NAN,
        iterations,
        duality_gap: 0.0,
    };
    // structural columns
    let mut maps = Vec::with_capacity(nv);
    let mut ub: Vec<f64> = Vec::new();
    let mut cost: Vec<f64> = Vec::new();
    let mut obj_const = 0.0;
    for v in 0..nv {
        let (l, u) = (lo[v], hi[v]);
        if l > u + FEAS_TOL {
            return Ok(infeasible(0));
        }
        let c = sign * p.objective[v];
        if l.is_finite() {
            maps.push(ColMap::Shift(ub.len(), l));
            ub.push(if u.is_finite() { (u - l).max(0.0) } else { INF });
            cost.push(c);
            obj_const += c * l;
        } else if u.is_finite() {
            maps.push(ColMap::Flip(ub.len(), u));
            ub.push(INF);
            cost.push(-c);
            obj_const += c * u;
        } else {
            maps.push(ColMap::Split(ub.len(), ub.len() + 1));
            ub.extend([INF, INF]);
            cost.extend([c, -c]);
        }
    }
    let n_struct = ub.len();
    let m = p.rows.len();
    let n_slack = p.rows.iter().filter(|r| r.rel != Relation::Eq).count();
    // dense rows over structural + slack columns
    let width = n_struct + n_slack;
    let mut a = vec![0.0; m * width];
    let mut b = vec![0.0; m];
    let mut slack_of_row = vec![None; m];
    let mut next_slack = n_struct;
    for (i, r) in p.rows.iter().enumerate() {
        let mut rhs = r.rhs;
        for &(v, coef) in &r.coeffs {
            match maps[v] {
                ColMap::Shift(c, off) => {
                    a[i * width + c] += coef;
                    rhs -= coef * off;
                }
                ColMap::Flip(c, off) => {
                    a[i * width + c] -= coef;
                    rhs -= coef * off;
                }
                ColMap::Split(cp, cn) => {
                    a[i * width + cp] += coef;
                    a[i * width + cn] -= coef;
                }
            }
        }
        match r.rel {
            Relation::Le => {
                a[i * width + next_slack] = 1.0;
                slack_of_row[i] = Some(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                a[i * width + next_slack] = -1.0;
                slack_of_row[i] = Some(next_slack);
                next_slack += 1;
            }
            Relation::Eq => {}
        }
        if rhs < 0.0 {
            for x in &mut a[i * width..(i + 1) * width] {
                *x = -*x;
            }
            rhs = -rhs;
        }
        b[i] = rhs;
    }
    ub.extend(std::iter::repeat_n(INF, n_slack));
    cost.extend(std::iter::repeat_n(0.0, n_slack));
    // initial basis: slack with +1 or an artificial
    let mut basis = vec![usize::MAX; m];
    let mut artificial_rows = Vec::new();
    for i in 0..m {
        if let Some(s) = slack_of_row[i] {
            if a[i * width + s] > 0.0 {
                basis[i] = s;
                continue;
            }
        }
        artificial_rows.push(i);
    }
    let n_art = artificial_rows.len();
    let cols = width + n_art;
    let mut t = vec![0.0; m * cols];
    for i in 0..m {
        t[i * cols..i * cols + width].copy_from_slice(&a[i * width..(i + 1) * width]);
    }
    for (k, &i) in artificial_rows.iter().enumerate() {
        t[i * cols + width + k] = 1.0;
        basis[i] = width + k;
    }
    ub.extend(std::iter::repeat_n(INF, n_art));
    cost.extend(std::iter::repeat_n(0.0, n_art));
    let mut is_basic = vec![false; cols];
    for &j in &basis {
        is_basic[j] = true;
    }
    let original = if check_duality { Some(t.clone()) } else { None };
    let init_basis = basis.clone();
    let mut tab =
        Tableau { rows: m, cols, t, beta: b.clone(), basis, at_upper: vec![false; cols], is_basic, ub, iterations: 0 };
    let max_iter = 20_000 + 50 * (m + cols);
    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        for c in phase1.iter_mut().skip(width) {
            *c = 1.0;
        }
        tab.optimize(&phase1, max_iter)?;
        let infeas: f64 = (0..m).filter(|&i| tab.basis[i] >= width).map(|i| tab.beta[i]).sum();
        let scale = 1.0 + b.iter().fold(0.0f64, |s, &v| s.max(v.abs()));
        if infeas > FEAS_TOL * scale {
            return Ok(infeasible(tab.iterations));
        }
        // drive basic artificials out where possible, then freeze all artificials
        let mut dummy = vec![0.0; cols];
        for r in 0..m {
            if tab.basis[r] < width {
                continue;
            }
            let k = (0..width)
                .filter(|&j| !tab.is_basic[j])
                .max_by(|&x, &y| tab.at(r, x).abs().total_cmp(&tab.at(r, y).abs()));
            if let Some(k) = k {
                if tab.at(r, k).abs() > 1e-7 {
                    let start = if tab.at_upper[k] { tab.ub[k] } else { 0.0 };
                    tab.pivot(r, k, &mut dummy);
                    tab.beta[r] = start;
                }
            }
        }
        for j in width..cols {
            tab.ub[j] = 0.0;
            tab.at_upper[j] = false;
        }
    }
    let status = tab.optimize(&cost, max_iter)?;
    if status == LpStatus::Unbounded {
        return Ok(LpResult {
            status,
            x: Vec::new(),
            objective: f64::NAN,
            iterations: tab.iterations,
            duality_gap: 0.0,
        });
    }
    // internal column values
    let mut val = vec![0.0; cols];
    for j in 0..cols {
        if !tab.is_basic[j] && tab.at_upper[j] {
            val[j] = tab.ub[j];
        }
    }
    for i in 0..m {
        val[tab.basis[i]] = tab.beta[i];
    }
    let internal_obj: f64 = (0..cols).map(|j| cost[j] * val[j]).sum();
    let mut duality_gap = 0.0;
    if let Some(orig) = original {
        // y = c_B B^-1, with B^-1 read from the initial identity columns
        let mut y = vec![0.0; m];
        for (i, yi) in y.iter_mut().enumerate() {
            let col = init_basis[i];
            *yi = (0..m).map(|k| cost[tab.basis[k]] * tab.at(k, col)).sum();
        }
        let mut dual = (0..m).map(|i| y[i] * b[i]).sum::<f64>();
        for j in 0..cols {
            if tab.is_basic[j] || !tab.at_upper[j] || tab.ub[j] == 0.0 {
                continue;
            }
            let rc = cost[j] - (0..m).map(|i| y[i] * orig[i * cols + j]).sum::<f64>();
            dual += rc * tab.ub[j];
        }
        duality_gap = (internal_obj - dual).abs() / internal_obj.abs().max(1.0);
        if duality_gap > DUALITY_TOL {
            return Err(Error::Numerical(format!(
                "relative duality gap {duality_gap:e} (primal {internal_obj}, dual {dual})"
            )));
        }
    }
    let mut x = vec![0.0; nv];
    for (v, map) in maps.iter().enumerate() {
        x[v] = match *map {
            ColMap::Shift(c, off) => off + val[c],
            ColMap::Flip(c, off) => off - val[c],
            ColMap::Split(cp, cn) => val[cp] - val[cn],
        };
    }
    Ok(LpResult {
        status: LpStatus::Optimal,
        objective: p.offset + sign * (internal_obj + obj_const),
        x,
        iterations: tab.iterations,
        duality_gap,
    })
}
