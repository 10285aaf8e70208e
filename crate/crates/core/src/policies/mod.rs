//! Robust scheduling policies and the perfect-hindsight oracle.

mod ar_dp;
mod ar_milo;
mod ph;
mod sa;
mod sl;
mod two_stage;

pub use ar_dp::solve_ar_dp;
pub use ar_milo::{solve_ar_milo, solve_ar_milo_with, MiloStats};
pub use ph::solve_ph;
pub use sa::{solve_sa, solve_sa_from, SaPlan};
pub use sl::{list_worst_case, solve_sl, SlPlan};
pub use two_stage::{solve_2ssa, solve_2ssa_with, TwoStageOptions, TwoStagePlan};

/// Tasks to start now and the worst-case makespan promised from this state on.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDecision {
    pub tasks: Vec<usize>,
    pub value: f64,
}
