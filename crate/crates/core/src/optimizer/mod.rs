//! The data-driven iLQR loop: identification, Riccati backward pass and a
//! line-searched closed-loop forward pass.

mod backward;
mod cost;
mod forward;
mod solve;

pub use backward::{
    backward_pass, riccati_step_expanded, riccati_step_inverse, BackwardPassResult,
    MAX_HESSIAN_CONDITION,
};
pub use cost::{evaluate_cost, CostSpec};
pub use forward::{
    forward_update, line_search, ForwardSettings, LineSearchOptions, LineSearchOutcome,
};
pub use solve::{
    assemble_model, initial_nominal, noiseless_cost, solve, IterationRecord, NoObserver,
    SolveObserver, SolveOptions, SolveResult, TerminationReason,
};
