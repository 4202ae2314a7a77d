//! Configuration, scenario orchestration and CSV export.

mod config;
mod export;
mod scenario;

pub use config::{
    default_initial_deviation_std, default_rollouts, observation_name, ExperimentConfig, PlantKind,
    Scenario, DEFAULT_AVERAGING, DEFAULT_NOISE_RATIO, OUTPUT_DIR_ENV,
};
pub use export::{
    export_run, write_compare, write_convergence, write_dataset, write_summary, write_trajectory,
    DatasetDumper, COMPARE_HEADER, CONVERGENCE_HEADER, DATASET_HEADER, SUMMARY_HEADER,
};
pub use scenario::{
    aligned_cost, comparison_arms, run_ensemble, run_scenario, run_scenario_with, summarize,
    EnsembleResult, EnsembleSummary, RunRecord, SummaryRow,
};
