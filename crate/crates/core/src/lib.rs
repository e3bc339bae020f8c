//! Multi-prediction learning workbench: off-policy GVF learners, successor
//! features for non-stationary cumulants, GPI behavior and exact oracles.

pub mod behavior;
pub mod domain;
pub mod error;
pub mod envs;
pub mod features;
pub mod harness;
pub mod learners;
pub mod linalg;
pub mod optim;
pub mod oracle;

pub use error::{Error, Result};
