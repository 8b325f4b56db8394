pub mod baselines;
pub mod error;
pub mod harness;
pub mod problems;
pub mod sketch;
pub mod solver;
pub mod subproblem;

pub use error::{Error, Result};
