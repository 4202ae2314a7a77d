//! Identification of the local information-state model from perturbed rollouts.

mod collect;
mod fit;
mod oracle;

pub use collect::{
    collect_rollouts, min_rollouts, PerturbationPlan, RegressionStep, RolloutDataset,
};
pub use fit::{debias_full_state, fit_arma, IdentifiedModel, MAX_REGRESSOR_CONDITION};
pub use oracle::{arma_from_ltv, bias_report, noise_stacks, stack_window, BiasReport, NoiseStacks};
