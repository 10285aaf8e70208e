//! Mixed-integer linear programs: representation, a dense simplex, branch-and-bound,
//! and the builder for the adversary scenario-tree program.

mod bnb;
pub mod milo;
mod program;
mod simplex;

pub use bnb::{solve_lp, solve_mip, solve_mip_with, MipOptions};
pub use program::{MipSolution, Program, Relation, Row, Sense, Status, Variable};
