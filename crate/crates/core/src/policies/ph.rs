use crate::error::{invalid, Error, Result};
use crate::model::{Partition, Time};

const MAX_TASKS_TWO: usize = 24;
const MAX_TASKS_GENERAL: usize = 10;

/// Optimal makespan partition for known durations; ties go to the
/// lexicographically smallest assignment.
pub fn solve_ph<T: Time>(d: &[T], m: usize) -> Result<(Partition, T)> {
    let n = d.len();
    if m < 2 || n == 0 {
        return invalid(format!("need m >= 2 machines and at least one task, got m={m}, n={n}"));
    }
    let cap = if m == 2 { MAX_TASKS_TWO } else { MAX_TASKS_GENERAL };
    if n > cap {
        return Err(Error::Capacity(format!("perfect hindsight supports n <= {cap} tasks for m={m}")));
    }
    let total: f64 = d.iter().map(|v| v.units()).sum();
    let longest = d.iter().map(|v| v.units()).fold(0.0, f64::max);
    let floor = (total / m as f64).max(longest);

    // optimal value: longest tasks first, starting from an LPT incumbent
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].units().total_cmp(&d[a].units()).then(a.cmp(&b)));
    let mut loads = vec![T::default(); m];
    for &i in &order {
        let j = (0..m).min_by(|&x, &y| loads[x].units().total_cmp(&loads[y].units())).expect("m >= 2");
        loads[j] = loads[j] + d[i];
    }
    let mut best = loads.iter().copied().fold(T::default(), T::max_of);
    let mut search = Search { d, order: &order, floor, best: &mut best, loads: vec![T::default(); m] };
    search.improve(0);

    // lexicographically first partition attaining it
    let mut assignment = vec![0; n];
    let mut loads = vec![T::default(); m];
    let found = first_fit(d, best, 0, &mut loads, &mut assignment);
    debug_assert!(found);
    Ok((Partition { assignment, m }, best))
}

struct Search<'a, T> {
    d: &'a [T],
    order: &'a [usize],
    floor: f64,
    best: &'a mut T,
    loads: Vec<T>,
}

impl<T: Time> Search<'_, T> {
    /// Returns true once the best value meets the trivial lower bound.
    fn improve(&mut self, k: usize) -> bool {
        if self.best.units() <= self.floor + 1e-12 {
            return true;
        }
        let Some(&i) = self.order.get(k) else {
            let v = self.loads.iter().copied().fold(T::default(), T::max_of);
            if T::earlier(v, *self.best) {
                *self.best = v;
            }
            return false;
        };
        let mut tried_empty = false;
        for j in 0..self.loads.len() {
            let empty = self.loads[j].units() == 0.0;
            if empty {
                if tried_empty {
                    continue;
                }
                tried_empty = true;
            }
            let next = self.loads[j] + self.d[i];
            if !T::earlier(next, *self.best) {
                continue;
            }
            let prev = self.loads[j];
            self.loads[j] = next;
            let done = self.improve(k + 1);
            self.loads[j] = prev;
            if done {
                return true;
            }
        }
        false
    }
}

fn first_fit<T: Time>(d: &[T], limit: T, i: usize, loads: &mut [T], assignment: &mut [usize]) -> bool {
    if i == d.len() {
        return true;
    }
    let mut tried_empty = false;
    for j in 0..loads.len() {
        if loads[j].units() == 0.0 {
            if tried_empty {
                continue;
            }
            tried_empty = true;
        }
        let next = loads[j] + d[i];
        if T::earlier(limit, next) {
            continue;
        }
        let prev = loads[j];
        loads[j] = next;
        assignment[i] = j;
        if first_fit(d, limit, i + 1, loads, assignment) {
            return true;
        }
        loads[j] = prev;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::evaluate_partition;
    use proptest::prelude::*;

    fn brute(d: &[i64], m: usize) -> i64 {
        let n = d.len();
        (0..m.pow(n as u32))
            .map(|mut code| {
                let mut loads = vec![0; m];
                for &v in d {
                    loads[code % m] += v;
                    code /= m;
                }
                *loads.iter().max().unwrap()
            })
            .min()
            .unwrap()
    }

    #[test]
    fn four_task_scenarios() {
        let (p, v) = solve_ph(&[300i64, 200, 300, 550], 2).unwrap();
        assert_eq!(v, 750);
        assert_eq!(p.assignment, vec![0, 1, 0, 1]);
        assert_eq!(solve_ph(&[25i64, 500, 350, 400], 2).unwrap().1, brute(&[25, 500, 350, 400], 2));
    }

    #[test]
    fn equal_durations_balance() {
        assert_eq!(solve_ph(&[2.0f64; 6], 2).unwrap().1, 6.0);
    }

    #[test]
    fn capacity() {
        assert!(matches!(solve_ph(&[1.0f64; 25], 2), Err(Error::Capacity(_))));
        assert!(matches!(solve_ph(&[1.0f64; 11], 3), Err(Error::Capacity(_))));
    }

    proptest! {
        #[test]
        fn matches_exhaustive_scan(d in prop::collection::vec(1i64..60, 2..8), m in 2usize..4) {
            let (p, v) = solve_ph(&d, m).unwrap();
            prop_assert_eq!(v, brute(&d, m));
            prop_assert_eq!(evaluate_partition(&p, &d).unwrap(), v);
        }
    }
}
