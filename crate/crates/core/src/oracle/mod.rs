//! Exact answers for small problems, error metrics and verification suites.

pub mod checks;
pub mod mdp;
pub mod metrics;
pub mod truth;

pub use checks::CheckReport;
pub use mdp::TabularMdpModel;
pub use truth::{EvalSet, Truth};
