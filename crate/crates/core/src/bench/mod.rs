//! Instance generation, rolling-horizon simulation, experiment runs and
//! performance measures.

mod experiment;
mod generate;
mod io;
mod measures;
mod simulate;

pub use experiment::{run_experiment, ExperimentConfig};
pub use generate::{
    derive_seed, generate_budgeted_instance, generate_small_instance, max_alpha, sample_ball, sample_scenario, Family,
};
pub use io::{
    instance_from_str, instance_to_string, read_instance, read_results, write_instance, write_results, ResultRow,
};
pub use measures::{compute_measures, ecdf, write_ecdf, write_measures, Measure};
pub use simulate::{decide, rolling_horizon, worst_realized, Policy, SimulationRecord, TraceEvent};
