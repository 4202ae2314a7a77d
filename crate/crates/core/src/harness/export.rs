//! CSV writers. Floats use Rust's shortest round-trip formatting so equal
//! values always produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use super::config::observation_name;
use super::scenario::{aligned_cost, EnsembleSummary, RunRecord};
use crate::error::Result;
use crate::optimizer::{IterationRecord, SolveObserver};
use crate::plants::Trajectory;
use crate::sysid::RolloutDataset;

pub const CONVERGENCE_HEADER: [&str; 6] = [
    "iteration",
    "cost",
    "alpha",
    "residual",
    "rollouts",
    "millis",
];
pub const SUMMARY_HEADER: [&str; 5] = ["seed", "iteration", "cost", "mean", "std"];
pub const COMPARE_HEADER: [&str; 10] = [
    "panel",
    "scenario",
    "seed",
    "iteration",
    "cost",
    "alpha",
    "residual",
    "rollouts",
    "millis",
    "termination",
];
pub const DATASET_HEADER: [&str; 5] = ["t", "rollout", "field", "index", "value"];

fn num(x: f64) -> String {
    format!("{x}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

fn convergence_fields(r: &IterationRecord, wall_clock: bool) -> [String; 6] {
    [
        r.iteration.to_string(),
        num(r.cost),
        num(r.alpha),
        num(r.residual),
        r.rollouts().to_string(),
        if wall_clock {
            r.millis.to_string()
        } else {
            "0".to_string()
        },
    ]
}

/// `iteration,cost,alpha,residual,rollouts,millis`, one row per record.
/// `millis` is written as 0 unless `wall_clock` is set.
pub fn write_convergence(path: &Path, records: &[IterationRecord], wall_clock: bool) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(CONVERGENCE_HEADER)?;
    for r in records {
        w.write_record(convergence_fields(r, wall_clock))?;
    }
    w.flush()?;
    Ok(())
}

/// `t,x_0..,u_0..,z_0..`; the control cells of the final row are empty.
pub fn write_trajectory(path: &Path, trajectory: &Trajectory) -> Result<()> {
    let n_x = trajectory.states[0].len();
    let n_u = trajectory.controls.first().map_or(0, |u| u.len());
    let n_z = trajectory.measurements[0].len();
    let mut w = writer(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..n_x).map(|i| format!("x_{i}")));
    header.extend((0..n_u).map(|i| format!("u_{i}")));
    header.extend((0..n_z).map(|i| format!("z_{i}")));
    w.write_record(&header)?;
    for t in 0..trajectory.states.len() {
        let mut row = vec![t.to_string()];
        row.extend(trajectory.states[t].iter().map(|&v| num(v)));
        match trajectory.controls.get(t) {
            Some(u) => row.extend(u.iter().map(|&v| num(v))),
            None => row.extend(std::iter::repeat_n(String::new(), n_u)),
        }
        row.extend(trajectory.measurements[t].iter().map(|&v| num(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `seed,iteration,cost,mean,std`: every seed on the common iteration grid.
pub fn write_summary(path: &Path, records: &[&RunRecord], summary: &EnsembleSummary) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for record in records {
        for row in &summary.rows {
            w.write_record([
                record.seed.to_string(),
                row.iteration.to_string(),
                num(aligned_cost(record, row.iteration)),
                num(row.mean),
                num(row.std),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Convergence rows of several arms in one file, tagged with the
/// observation panel, scenario and seed.
pub fn write_compare(path: &Path, runs: &[&RunRecord], wall_clock: bool) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(COMPARE_HEADER)?;
    for run in runs {
        for r in &run.records {
            let [iteration, cost, alpha, residual, rollouts, millis] =
                convergence_fields(r, wall_clock);
            w.write_record([
                observation_name(run.observation).to_string(),
                run.scenario.name().to_string(),
                run.seed.to_string(),
                iteration,
                cost,
                alpha,
                residual,
                rollouts,
                millis,
                run.termination.name().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long format `t,rollout,field,index,value` with `field` either
/// `regressor` or `response`.
pub fn write_dataset(path: &Path, dataset: &RolloutDataset) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(DATASET_HEADER)?;
    for step in &dataset.steps {
        for row in 0..step.regressors.nrows() {
            for (field, m) in [
                ("regressor", &step.regressors),
                ("response", &step.responses),
            ] {
                for col in 0..m.ncols() {
                    w.write_record([
                        step.t.to_string(),
                        row.to_string(),
                        field.to_string(),
                        col.to_string(),
                        num(m[(row, col)]),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Observer that writes each iteration's identification data to
/// `dir/iteration_<k>.csv`. The first write error is kept and later
/// iterations are skipped.
pub struct DatasetDumper {
    pub dir: PathBuf,
    pub error: Option<crate::Error>,
    pub written: Vec<PathBuf>,
}

impl DatasetDumper {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DatasetDumper {
            dir: dir.into(),
            error: None,
            written: Vec::new(),
        }
    }

    pub fn finish(self) -> Result<Vec<PathBuf>> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.written),
        }
    }
}

impl SolveObserver for DatasetDumper {
    fn dataset(&mut self, iteration: usize, dataset: &RolloutDataset) {
        if self.error.is_some() {
            return;
        }
        let path = self.dir.join(format!("iteration_{iteration}.csv"));
        match write_dataset(&path, dataset) {
            Ok(()) => self.written.push(path),
            Err(e) => self.error = Some(e),
        }
    }
}

/// Writes `convergence.csv` and `trajectory.csv` for one run into `dir`.
pub fn export_run(dir: &Path, record: &RunRecord, wall_clock: bool) -> Result<()> {
    write_convergence(&dir.join("convergence.csv"), &record.records, wall_clock)?;
    write_trajectory(&dir.join("trajectory.csv"), &record.trajectory)
}
