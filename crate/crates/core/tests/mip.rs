use itertools::Itertools;
use proptest::prelude::*;

use rpms::mip::{solve_lp, solve_mip, Program, Relation, Sense};

#[derive(Debug, Clone)]
struct Case {
    objective: Vec<i32>,
    upper: Vec<i32>,
    rows: Vec<(Vec<i32>, i32)>,
    sense: Sense,
}

fn case() -> impl Strategy<Value = Case> {
    (2usize..=4).prop_flat_map(|k| {
        (
            prop::collection::vec(-5i32..=5, k),
            prop::collection::vec(1i32..=3, k),
            prop::collection::vec((prop::collection::vec(-3i32..=4, k), 0i32..=9), 1..=3),
            prop::bool::ANY,
        )
            .prop_map(|(objective, upper, rows, max)| Case {
                objective,
                upper,
                rows,
                sense: if max { Sense::Maximize } else { Sense::Minimize },
            })
    })
}

fn program(c: &Case, integer: bool) -> Program {
    let mut p = Program::new(c.sense);
    for (i, (&obj, &ub)) in c.objective.iter().zip(&c.upper).enumerate() {
        let v = p.add_var(format!("x{i}"), 0.0, ub as f64, integer);
        p.set_objective(v, obj as f64);
    }
    for (a, b) in &c.rows {
        p.add_row(a.iter().enumerate().map(|(i, &v)| (i, v as f64)).collect(), Relation::Le, *b as f64);
    }
    p
}

/// Best objective over the integer grid; the origin is always feasible.
fn enumerate(c: &Case) -> f64 {
    let values = c
        .upper
        .iter()
        .map(|&u| 0..=u)
        .multi_cartesian_product()
        .filter(|x| c.rows.iter().all(|(a, b)| a.iter().zip(x).map(|(a, x)| a * x).sum::<i32>() <= *b))
        .map(|x| c.objective.iter().zip(&x).map(|(a, x)| a * x).sum::<i32>() as f64);
    match c.sense {
        Sense::Maximize => values.fold(f64::NEG_INFINITY, f64::max),
        Sense::Minimize => values.fold(f64::INFINITY, f64::min),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn integer_programs_match_enumeration(c in case()) {
        let sol = solve_mip(&program(&c, true)).unwrap();
        prop_assert!(sol.is_optimal());
        prop_assert!((sol.objective - enumerate(&c)).abs() <= 1e-6, "{} vs {}", sol.objective, enumerate(&c));
        prop_assert!(program(&c, true).max_violation(&sol.values) <= 1e-6);
        prop_assert!(sol.values.iter().all(|v| (v - v.round()).abs() <= 1e-6));
    }

    #[test]
    fn relaxation_bounds_the_integer_optimum(c in case()) {
        let lp = solve_lp(&program(&c, false)).unwrap().objective;
        let ip = enumerate(&c);
        match c.sense {
            Sense::Maximize => prop_assert!(lp >= ip - 1e-6),
            Sense::Minimize => prop_assert!(lp <= ip + 1e-6),
        }
    }
}
