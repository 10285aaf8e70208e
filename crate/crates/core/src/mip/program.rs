use std::fmt::Write as _;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rel: Relation,
    pub rhs: f64,
}

/// Linear objective, linear rows, bounds and integrality marks.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub sense: Sense,
    pub vars: Vec<Variable>,
    pub objective: Vec<f64>,
    pub offset: f64,
    pub rows: Vec<Row>,
}

impl Program {
    pub fn new(sense: Sense) -> Self {
        Program { sense, vars: Vec::new(), objective: Vec::new(), offset: 0.0, rows: Vec::new() }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, integer: bool) -> usize {
        self.vars.push(Variable { name: name.into(), lower, upper, integer });
        self.objective.push(0.0);
        self.vars.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> usize {
        self.add_var(name, 0.0, 1.0, true)
    }

    pub fn set_objective(&mut self, var: usize, coef: f64) {
        self.objective[var] = coef;
    }

    /// Add a row; repeated variables are merged and zero coefficients dropped.
    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rel: Relation, rhs: f64) {
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        let mut sorted = coeffs;
        sorted.sort_by_key(|c| c.0);
        for (v, a) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += a,
                _ => merged.push((v, a)),
            }
        }
        merged.retain(|c| c.1 != 0.0);
        self.rows.push(Row { coeffs: merged, rel, rhs });
    }

    pub fn num_integer(&self) -> usize {
        self.vars.iter().filter(|v| v.integer).count()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest violation of rows, bounds and integrality at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for r in &self.rows {
            let lhs: f64 = r.coeffs.iter().map(|&(v, a)| a * x[v]).sum();
            let viol = match r.rel {
                Relation::Le => lhs - r.rhs,
                Relation::Ge => r.rhs - lhs,
                Relation::Eq => (lhs - r.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        for (v, var) in self.vars.iter().enumerate() {
            worst = worst.max(var.lower - x[v]).max(x[v] - var.upper);
            if var.integer {
                worst = worst.max((x[v] - x[v].round()).abs());
            }
        }
        worst
    }

    /// LP-format text export with the program's variable names.
    pub fn to_lp_string(&self) -> String {
        let mut s = String::new();
        let term = |s: &mut String, a: f64, name: &str, first: bool| {
            if a < 0.0 {
                let _ = write!(s, " - {} {}", -a, name);
            } else if first {
                let _ = write!(s, " {} {}", a, name);
            } else {
                let _ = write!(s, " + {} {}", a, name);
            }
        };
        s.push_str(match self.sense {
            Sense::Maximize => "Maximize\n obj:",
            Sense::Minimize => "Minimize\n obj:",
        });
        let mut first = true;
        for (v, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                term(&mut s, c, &self.vars[v].name, first);
                first = false;
            }
        }
        if first {
            s.push_str(" 0");
        }
        s.push_str("\nSubject To\n");
        for (k, r) in self.rows.iter().enumerate() {
            let _ = write!(s, " c{k}:");
            for (j, &(v, a)) in r.coeffs.iter().enumerate() {
                term(&mut s, a, &self.vars[v].name, j == 0);
            }
            if r.coeffs.is_empty() {
                s.push_str(" 0");
            }
            let op = match r.rel {
                Relation::Le => "<=",
                Relation::Ge => ">=",
                Relation::Eq => "=",
            };
            let _ = writeln!(s, " {} {}", op, r.rhs);
        }
        s.push_str("Bounds\n");
        for v in &self.vars {
            let lo = if v.lower.is_finite() { v.lower.to_string() } else { "-inf".into() };
            let hi = if v.upper.is_finite() { v.upper.to_string() } else { "+inf".into() };
            let _ = writeln!(s, " {} <= {} <= {}", lo, v.name, hi);
        }
        let ints: Vec<&str> = self.vars.iter().filter(|v| v.integer).map(|v| v.name.as_str()).collect();
        if !ints.is_empty() {
            s.push_str("General\n");
            for chunk in ints.chunks(8) {
                let _ = writeln!(s, " {}", chunk.join(" "));
            }
        }
        s.push_str("End\n");
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node limit reached; the incumbent (if any) is reported.
    Limit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipSolution {
    pub status: Status,
    pub objective: f64,
    pub values: Vec<f64>,
    /// Best bound on the optimum still open when the search stopped.
    pub bound: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Largest relative primal-dual gap over the checked LP solves.
    pub max_duality_gap: f64,
    pub elapsed: Duration,
}

impl MipSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}
