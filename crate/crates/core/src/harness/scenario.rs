use rayon::prelude::*;

use super::config::{ExperimentConfig, Scenario};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::optimizer::{solve, IterationRecord, NoObserver, SolveObserver, TerminationReason};
use crate::plants::{ObservationMode, Trajectory};

/// Everything one `(config, seed)` run produces.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub config_hash: String,
    pub scenario: Scenario,
    pub observation: ObservationMode,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
    pub trajectory: Trajectory,
    pub gains: Vec<Mat>,
    pub termination: TerminationReason,
}

impl RunRecord {
    pub fn final_cost(&self) -> f64 {
        self.records.last().map(|r| r.cost).unwrap_or(f64::NAN)
    }

    pub fn total_rollouts(&self) -> u64 {
        self.records.iter().map(|r| r.rollouts()).sum()
    }

    pub fn identification_rollouts(&self) -> u64 {
        self.records.iter().map(|r| r.identification_rollouts).sum()
    }

    pub fn forward_rollouts(&self) -> u64 {
        self.records.iter().map(|r| r.forward_rollouts).sum()
    }
}

pub fn run_scenario(config: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    run_scenario_with(config, seed, &mut NoObserver)
}

pub fn run_scenario_with(
    config: &ExperimentConfig,
    seed: u64,
    observer: &mut dyn SolveObserver,
) -> Result<RunRecord> {
    let wrap = |e: Error| Error::Run {
        scenario: config.scenario.name(),
        seed,
        source: Box::new(e),
    };
    let sim = config.simulator();
    let options = config.solve_options(seed);
    let result = solve(&sim, &config.initial_controls(), &options, observer).map_err(wrap)?;
    Ok(RunRecord {
        config_hash: config.hash(),
        scenario: config.scenario,
        observation: config.observation,
        seed,
        records: result.records,
        trajectory: result.nominal,
        gains: result.gains,
        termination: result.termination,
    })
}

/// Cross-seed statistics at one iteration index. Runs that stopped earlier
/// contribute their last cost.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub iteration: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnsembleSummary {
    pub rows: Vec<SummaryRow>,
    pub identification_rollouts: u64,
    pub forward_rollouts: u64,
}

impl EnsembleSummary {
    pub fn total_rollouts(&self) -> u64 {
        self.identification_rollouts + self.forward_rollouts
    }
}

#[derive(Debug)]
pub struct EnsembleResult {
    pub runs: Vec<(u64, Result<RunRecord>)>,
    pub summary: EnsembleSummary,
}

impl EnsembleResult {
    pub fn successes(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter_map(|(_, r)| r.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = (u64, &Error)> {
        self.runs
            .iter()
            .filter_map(|(s, r)| r.as_ref().err().map(|e| (*s, e)))
    }
}

/// Cost of `record` at `iteration`, holding the last value after it stopped.
pub fn aligned_cost(record: &RunRecord, iteration: usize) -> f64 {
    let last = record.records.len() - 1;
    record.records[iteration.min(last)].cost
}

pub fn summarize(records: &[&RunRecord]) -> EnsembleSummary {
    let len = records.iter().map(|r| r.records.len()).max().unwrap_or(0);
    let rows = (0..len)
        .map(|i| {
            let costs: Vec<f64> = records.iter().map(|r| aligned_cost(r, i)).collect();
            let n = costs.len() as f64;
            let mean = costs.iter().sum::<f64>() / n;
            let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
            SummaryRow {
                iteration: i,
                mean,
                std: var.sqrt(),
            }
        })
        .collect();
    EnsembleSummary {
        rows,
        identification_rollouts: records.iter().map(|r| r.identification_rollouts()).sum(),
        forward_rollouts: records.iter().map(|r| r.forward_rollouts()).sum(),
    }
}

/// Runs every seed of `config` independently. A failing seed is reported in
/// place and does not stop the others.
pub fn run_ensemble(config: &ExperimentConfig) -> EnsembleResult {
    let runs: Vec<(u64, Result<RunRecord>)> = config
        .seeds
        .par_iter()
        .map(|&seed| (seed, run_scenario(config, seed)))
        .collect();
    let ok: Vec<&RunRecord> = runs.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
    let summary = summarize(&ok);
    EnsembleResult { runs, summary }
}

/// The comparison arms for one plant: noiseless nominal plus the noisy arms
/// for each observation mode.
pub fn comparison_arms() -> Vec<(ObservationMode, Scenario)> {
    vec![
        (ObservationMode::FullState, Scenario::NominalNoiseless),
        (
            ObservationMode::FullState,
            Scenario::FullyObservedNoisyUnmodified,
        ),
        (
            ObservationMode::FullState,
            Scenario::FullyObservedNoisyModified,
        ),
        (ObservationMode::PositionsOnly, Scenario::NominalNoiseless),
        (
            ObservationMode::PositionsOnly,
            Scenario::PartialNoisyUnmodified,
        ),
        (
            ObservationMode::PositionsOnly,
            Scenario::PartialNoisyModified,
        ),
        (
            ObservationMode::PositionsOnly,
            Scenario::PartialNoisyAveraged,
        ),
    ]
}
