//! Data-driven iterative LQR for partially observed nonlinear systems.
//!
//! The optimizer only touches the plant through rollouts. Each iteration
//! perturbs the current nominal trajectory, fits per-timestep ARMA models of
//! the measurement deviations by least squares, lifts them to a linear
//! time-varying model on the information state (stacked recent measurements
//! and controls), runs a Riccati backward pass and applies a line-searched
//! closed-loop update.
//!
//! Module map:
//!
//! - [`plants`]: simulated pendulum, cart-pole and synthetic LTV plants,
//!   seeded noise streams, rollouts and finite-difference linearization.
//! - [`info_state`]: information-state stacking and the structured
//!   information-state LTV matrices.
//! - [`sysid`]: perturbed rollout collection, ARMA least squares, the
//!   analytic ARMA oracle for known LTV systems and debiasing.
//! - [`optimizer`]: cost, backward pass, forward update, line search and the
//!   outer loop.
//! - [`harness`]: experiment configuration, scenarios, ensembles and CSV
//!   export.

pub mod checks;
pub mod error;
pub mod harness;
pub mod info_state;
pub mod linalg;
pub mod optimizer;
pub mod plants;
pub mod sysid;

pub use error::{Error, Result};
