use proptest::prelude::*;

use rpms::bench::{rolling_horizon, Policy};
use rpms::model::{Instance, State};
use rpms::policies::{solve_2ssa, solve_ar_dp, solve_ar_milo, solve_ph, solve_sa_from, solve_sl};
use rpms::uncertainty::{DiscreteSet, UncertaintySet};

const EPS: f64 = 1e-6;

/// Discrete sets on two machines: 4 or 5 tasks, up to 5 scenarios of
/// durations between 0.1 and 3.0.
fn discrete_instance() -> impl Strategy<Value = Instance> {
    (4usize..=5).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(1i64..=30, n), 1..=5).prop_map(|rows| {
            let scenarios = rows.into_iter().map(|r| r.into_iter().map(|v| v * 10).collect()).collect();
            let set = UncertaintySet::Discrete(DiscreteSet::new(scenarios).unwrap());
            Instance::new(2, set, "prop").unwrap()
        })
    })
}

fn scenarios(inst: &Instance) -> Vec<Vec<f64>> {
    let UncertaintySet::Discrete(ds) = &inst.set else { unreachable!() };
    (0..ds.scenarios.len()).map(|s| ds.scenario_units(s)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn promised_values_follow_the_dominance_chain(inst in discrete_instance()) {
        let s0 = State::<i64>::initial();
        let ph = scenarios(&inst).iter().map(|d| solve_ph(d, 2).unwrap().1).fold(0.0, f64::max);
        let ar = solve_ar_dp(&inst.set, 2, &s0).unwrap().value;
        let sl = solve_sl(&inst.set, 2, &s0).unwrap().value;
        let sa = solve_sa_from(&inst.set, 2, &s0).unwrap().value;
        let two = solve_2ssa(&inst.set, 2, &s0).unwrap().value;
        prop_assert!(ph <= ar + EPS, "PH {ph} > AR {ar}");
        prop_assert!(ar <= sl + EPS, "AR {ar} > SL {sl}");
        prop_assert!(ar <= two + EPS && two <= sa + EPS, "AR {ar}, 2SSA {two}, SA {sa}");
    }

    #[test]
    fn backward_induction_matches_the_adversary_program(inst in discrete_instance()) {
        let s0 = State::<i64>::initial();
        let dp = solve_ar_dp(&inst.set, 2, &s0).unwrap().value;
        let milo = solve_ar_milo(&inst.set, 2, &s0).unwrap().value;
        prop_assert!((dp - milo).abs() <= EPS, "DP {dp} vs MILO {milo}");
    }

    #[test]
    fn rolling_horizon_runs_stay_between_hindsight_and_promise(inst in discrete_instance()) {
        for policy in [Policy::ArDp, Policy::Sa, Policy::Sl, Policy::TwoStage] {
            for d in scenarios(&inst) {
                let r = rolling_horizon(policy, &inst, &d, None).unwrap();
                let ph = solve_ph(&d, 2).unwrap().1;
                prop_assert!(ph <= r.realized + EPS, "{policy}: realized {} below PH {ph}", r.realized);
                prop_assert!(r.realized <= r.promised + EPS, "{policy}: realized {} above promise {}", r.realized, r.promised);
            }
        }
    }
}
