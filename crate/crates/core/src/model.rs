//! Instances, schedules, system states and deterministic makespan evaluation.
//!
//! Task and machine ids are 0-based everywhere in the library.

use std::fmt::Debug;
use std::ops::{Add, Sub};

use crate::error::{invalid, Error, Result};
use crate::uncertainty::UncertaintySet;

/// Comparison tolerance for continuous durations.
pub const TIME_TOL: f64 = 1e-9;

/// Number of integer ticks per time unit for discrete scenario sets.
pub const TICKS_PER_UNIT: i64 = 100;

/// Convert a time value to integer ticks, rejecting values off the grid.
pub fn to_ticks(v: f64) -> Result<i64> {
    let t = (v * TICKS_PER_UNIT as f64).round();
    if (v * TICKS_PER_UNIT as f64 - t).abs() > 1e-6 {
        return invalid(format!("{v} is not a multiple of 1/{TICKS_PER_UNIT}"));
    }
    Ok(t as i64)
}

pub fn from_ticks(t: i64) -> f64 {
    t as f64 / TICKS_PER_UNIT as f64
}

/// Scalar time type: exact integer ticks or floating time with tolerance.
pub trait Time: Copy + Debug + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Default {
    /// True when `a` is strictly earlier than `b`.
    fn earlier(a: Self, b: Self) -> bool;
    /// Value in time units.
    fn units(self) -> f64;
    /// Value in integer ticks (rounded for floating time).
    fn ticks(self) -> i64;
    fn max_of(a: Self, b: Self) -> Self {
        if Self::earlier(a, b) {
            b
        } else {
            a
        }
    }
}

impl Time for i64 {
    fn earlier(a: Self, b: Self) -> bool {
        a < b
    }
    fn units(self) -> f64 {
        from_ticks(self)
    }
    fn ticks(self) -> i64 {
        self
    }
}

impl Time for f64 {
    fn earlier(a: Self, b: Self) -> bool {
        a < b - TIME_TOL
    }
    fn units(self) -> f64 {
        self
    }
    fn ticks(self) -> i64 {
        (self * TICKS_PER_UNIT as f64).round() as i64
    }
}

/// Event order: completion time first, then the lower task index.
pub fn finishes_before<T: Time>(ca: T, a: usize, cb: T, b: usize) -> bool {
    T::earlier(ca, cb) || (!T::earlier(cb, ca) && a < b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub n: usize,
    pub m: usize,
    pub set: UncertaintySet,
    pub label: String,
    pub seed: Option<u64>,
}

impl Instance {
    pub fn new(m: usize, set: UncertaintySet, label: impl Into<String>) -> Result<Self> {
        let n = set.dim();
        if m < 2 || n <= m {
            return invalid(format!("need n > m >= 2, got n={n}, m={m}"));
        }
        Ok(Instance { n, m, set, label: label.into(), seed: None })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// Task-to-machine assignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    pub assignment: Vec<usize>,
    pub m: usize,
}

impl Partition {
    pub fn new(assignment: Vec<usize>, m: usize) -> Result<Self> {
        if let Some(&j) = assignment.iter().find(|&&j| j >= m) {
            return invalid(format!("machine {j} out of range for m={m}"));
        }
        Ok(Partition { assignment, m })
    }

    pub fn from_parts(parts: &[Vec<usize>], n: usize) -> Result<Self> {
        let mut assignment = vec![usize::MAX; n];
        for (j, part) in parts.iter().enumerate() {
            for &i in part {
                if i >= n || assignment[i] != usize::MAX {
                    return invalid(format!("task {i} missing or assigned twice"));
                }
                assignment[i] = j;
            }
        }
        if assignment.contains(&usize::MAX) {
            return invalid("every task must be assigned");
        }
        Ok(Partition { assignment, m: parts.len() })
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn parts(&self) -> Vec<Vec<usize>> {
        let mut parts = vec![Vec::new(); self.m];
        for (i, &j) in self.assignment.iter().enumerate() {
            parts[j].push(i);
        }
        parts
    }

    /// Relabel machines so that machines appear in order of their lowest task.
    pub fn canonical(&self) -> Partition {
        let mut map = vec![usize::MAX; self.m];
        let mut next = 0;
        let mut assignment = Vec::with_capacity(self.n());
        for &j in &self.assignment {
            if map[j] == usize::MAX {
                map[j] = next;
                next += 1;
            }
            assignment.push(map[j]);
        }
        Partition { assignment, m: self.m }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    pub order: Vec<usize>,
}

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n || seen[i] {
                return invalid("permutation must list every task exactly once");
            }
            seen[i] = true;
        }
        Ok(Permutation { order })
    }
}

/// Maximum machine load of a partition.
pub fn evaluate_partition<T: Time>(p: &Partition, d: &[T]) -> Result<T> {
    if d.len() != p.n() {
        return invalid(format!("expected {} durations, got {}", p.n(), d.len()));
    }
    let mut load = vec![T::default(); p.m];
    for (i, &j) in p.assignment.iter().enumerate() {
        load[j] = load[j] + d[i];
    }
    Ok(load.into_iter().fold(T::default(), T::max_of))
}

/// List scheduling: the next task of `perm` goes to the first machine to become idle.
pub fn simulate_list<T: Time>(perm: &Permutation, d: &[T], m: usize) -> Result<(Partition, T)> {
    let n = perm.order.len();
    if d.len() != n {
        return invalid(format!("expected {n} durations, got {}", d.len()));
    }
    if m == 0 {
        return invalid("need at least one machine");
    }
    let mut assignment = vec![0; n];
    // (task, completion) per machine
    let mut busy: Vec<Option<(usize, T)>> = vec![None; m];
    let mut makespan = T::default();
    let mut queue = perm.order.iter().copied();
    for (j, slot) in busy.iter_mut().enumerate() {
        if let Some(i) = queue.next() {
            assignment[i] = j;
            *slot = Some((i, d[i]));
        }
    }
    loop {
        let next = busy.iter().enumerate().filter_map(|(j, s)| s.map(|(i, c)| (j, i, c))).reduce(|a, b| {
            if finishes_before(b.2, b.1, a.2, a.1) {
                b
            } else {
                a
            }
        });
        let Some((j, _, c)) = next else { break };
        makespan = T::max_of(makespan, c);
        busy[j] = queue.next().map(|i| {
            assignment[i] = j;
            (i, c + d[i])
        });
    }
    Ok((Partition { assignment, m }, makespan))
}

/// System state (S, F, D, I, elapsed, clock).
#[derive(Debug, Clone, PartialEq)]
pub struct State<T> {
    pub started: Vec<usize>,
    pub finished: Vec<usize>,
    pub realized: Vec<T>,
    /// Running tasks with elapsed processing time.
    pub running: Vec<(usize, T)>,
    pub clock: T,
}

impl<T: Time> Default for State<T> {
    fn default() -> Self {
        Self::initial()
    }
}

impl<T: Time> State<T> {
    pub fn initial() -> Self {
        State {
            started: Vec::new(),
            finished: Vec::new(),
            realized: Vec::new(),
            running: Vec::new(),
            clock: T::default(),
        }
    }

    pub fn is_started(&self, i: usize) -> bool {
        self.started.contains(&i)
    }

    pub fn unstarted(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|i| !self.started.contains(i)).collect()
    }

    pub fn start_time(&self, i: usize) -> Option<T> {
        self.running.iter().find(|r| r.0 == i).map(|&(_, e)| self.clock - e)
    }

    pub fn realized_of(&self, i: usize) -> Option<T> {
        self.finished.iter().position(|&f| f == i).map(|k| self.realized[k])
    }

    pub fn elapsed_of(&self, i: usize) -> Option<T> {
        self.running.iter().find(|r| r.0 == i).map(|r| r.1)
    }

    /// Start task `i` on an idle machine at the current clock.
    pub fn start(&self, i: usize) -> Result<Self> {
        if self.is_started(i) {
            return Err(Error::InvalidTransition(format!("task {i} already started")));
        }
        let mut s = self.clone();
        s.started.push(i);
        s.running.push((i, T::default()));
        Ok(s)
    }

    /// Record the completion of running task `l` at time `c`.
    pub fn advance(&self, l: usize, c: T) -> Result<Self> {
        let Some(pos) = self.running.iter().position(|r| r.0 == l) else {
            return Err(Error::InvalidTransition(format!("task {l} is not running")));
        };
        if T::earlier(c, self.clock) {
            return Err(Error::InvalidTransition(format!("completion {c:?} precedes clock")));
        }
        let dt = c - self.clock;
        let mut s = self.clone();
        let (_, elapsed) = s.running.remove(pos);
        for r in s.running.iter_mut() {
            r.1 = r.1 + dt;
        }
        s.finished.push(l);
        s.realized.push(elapsed + dt);
        s.clock = c;
        Ok(s)
    }

    /// Consistency of the bookkeeping lists.
    pub fn is_consistent(&self) -> bool {
        self.started.len() == self.finished.len() + self.running.len()
            && self.finished.len() == self.realized.len()
            && self.finished.iter().all(|f| self.started.contains(f))
            && self.running.iter().all(|r| self.started.contains(&r.0) && !self.finished.contains(&r.0))
    }

    pub fn map<U: Time>(&self, f: impl Fn(T) -> U) -> State<U> {
        State {
            started: self.started.clone(),
            finished: self.finished.clone(),
            realized: self.realized.iter().map(|&v| f(v)).collect(),
            running: self.running.iter().map(|&(i, e)| (i, f(e))).collect(),
            clock: f(self.clock),
        }
    }
}

/// Continue list scheduling from `state`: running tasks keep their start times,
/// idle machines take tasks of `order` immediately. Returns the makespan.
pub fn simulate_list_from<T: Time>(state: &State<T>, order: &[usize], d: &[T], m: usize) -> T {
    let mut busy: Vec<(usize, T)> = state.running.iter().map(|&(i, e)| (i, state.clock - e + d[i])).collect();
    let mut makespan = state.clock;
    let mut queue = order.iter().copied();
    while busy.len() < m {
        match queue.next() {
            Some(i) => busy.push((i, state.clock + d[i])),
            None => break,
        }
    }
    while !busy.is_empty() {
        let k = (0..busy.len())
            .reduce(|a, b| if finishes_before(busy[b].1, busy[b].0, busy[a].1, busy[a].0) { b } else { a })
            .unwrap();
        let (_, c) = busy.swap_remove(k);
        makespan = T::max_of(makespan, c);
        if let Some(i) = queue.next() {
            busy.push((i, c + d[i]));
        }
    }
    makespan
}
