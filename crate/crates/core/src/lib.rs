//! Robust makespan minimization on identical parallel machines with uncertain
//! task durations.

pub mod bench;
pub mod bounds;
pub mod error;
pub mod mip;
pub mod model;
pub mod policies;
pub mod tree;
pub mod uncertainty;

pub use error::{Error, Result};
