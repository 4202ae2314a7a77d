use std::time::Instant;

use super::backward::{backward_pass, BackwardPassResult};
use super::cost::{evaluate_cost, CostSpec};
use super::forward::{line_search, ForwardSettings, LineSearchOptions};
use crate::error::{check_dim, Error, Result};
use crate::info_state::{assemble_ltv, InfoLayout, LtvInfoStep};
use crate::linalg::{Mat, Vector};
use crate::plants::{ControlPolicy, NoiseSpec, Purpose, RolloutId, Simulator, Trajectory};
use crate::sysid::{collect_rollouts, fit_arma, IdentifiedModel, PerturbationPlan, RolloutDataset};

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub q: usize,
    pub cost: CostSpec,
    pub noise: NoiseSpec,
    pub plan: PerturbationPlan,
    /// Apply the previous iteration's gains during identification rollouts.
    pub identification_feedback: bool,
    /// Rollouts averaged into each forward-pass nominal.
    pub forward_averaging: usize,
    pub line_search: LineSearchOptions,
    /// Absolute tolerance on the optimality residual, scaled by `max(1, max_t |R u_t|)`.
    pub residual_tol: f64,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub rel_cost_tol: f64,
    pub max_iterations: usize,
    /// Under noise, consecutive non-improving line searches tolerated before stopping.
    pub max_stalls: usize,
}

impl SolveOptions {
    pub fn validate(&self, sim: &Simulator) -> Result<()> {
        if self.q == 0 {
            return Err(Error::InvalidArgument("q must be >= 1".into()));
        }
        check_dim(
            "cost measurement dim",
            sim.measurement_dim(),
            self.cost.measurement_dim(),
        )?;
        check_dim(
            "cost control dim",
            sim.control_dim(),
            self.cost.control_dim(),
        )?;
        self.cost.validate()?;
        self.noise.validate()?;
        self.line_search.validate()?;
        if self.forward_averaging == 0 {
            return Err(Error::InvalidArgument(
                "forward averaging must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminationReason {
    /// Optimality residual below tolerance.
    Converged,
    /// Accepted step with relative decrease below tolerance.
    CostPlateau,
    /// Noiseless line search found no sufficient decrease.
    LineSearchFailed,
    /// Too many consecutive non-improving steps under noise.
    Stalled,
    MaxIterations,
}

impl TerminationReason {
    pub fn name(self) -> &'static str {
        match self {
            TerminationReason::Converged => "converged",
            TerminationReason::CostPlateau => "cost_plateau",
            TerminationReason::LineSearchFailed => "line_search_failed",
            TerminationReason::Stalled => "stalled",
            TerminationReason::MaxIterations => "max_iterations",
        }
    }
}

/// One row of the convergence history. Iteration 0 is the initial guess.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    /// Accepted step length; 0 for iteration 0.
    pub alpha: f64,
    /// Max optimality residual at the nominal this iteration linearized about;
    /// NaN for iteration 0.
    pub residual: f64,
    pub accepted: bool,
    pub identification_rollouts: u64,
    pub forward_rollouts: u64,
    pub millis: u64,
}

impl IterationRecord {
    pub fn rollouts(&self) -> u64 {
        self.identification_rollouts + self.forward_rollouts
    }
}

/// Hooks into the solve loop. Every method defaults to doing nothing.
pub trait SolveObserver {
    /// Called before identification with the gains the rollouts will use.
    fn identification_gains(&mut self, _iteration: usize, _gains: Option<&[Mat]>) {}
    fn dataset(&mut self, _iteration: usize, _dataset: &RolloutDataset) {}
    fn model(&mut self, _iteration: usize, _model: &IdentifiedModel) {}
    fn backward(&mut self, _iteration: usize, _result: &BackwardPassResult) {}
    fn record(&mut self, _record: &IterationRecord) {}
}

/// Observer that ignores everything.
pub struct NoObserver;

impl SolveObserver for NoObserver {}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub nominal: Trajectory,
    /// Feedback gains of the last backward pass (zeros if none ran).
    pub gains: Vec<Mat>,
    pub records: Vec<IterationRecord>,
    pub termination: TerminationReason,
}

impl SolveResult {
    pub fn final_cost(&self) -> f64 {
        self.records.last().map(|r| r.cost).unwrap_or(f64::NAN)
    }

    pub fn total_rollouts(&self) -> u64 {
        self.records.iter().map(|r| r.rollouts()).sum()
    }
}

/// Simulates the initial open-loop guess the way forward passes are simulated.
pub fn initial_nominal(
    sim: &Simulator,
    initial_state: &Vector,
    controls: &[Vector],
    noise: &NoiseSpec,
    averaging: usize,
) -> Result<Trajectory> {
    let policy = ControlPolicy::OpenLoop {
        controls: controls.to_vec(),
    };
    let members = (0..averaging.max(1))
        .map(|m| {
            sim.rollout(
                initial_state,
                &policy,
                noise,
                controls.len(),
                RolloutId::new(Purpose::Forward, 0, 0, m),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(crate::plants::average_trajectories(&members))
}

/// Turns an identified ARMA model into per-step information-state dynamics.
pub fn assemble_model(model: &IdentifiedModel) -> Result<Vec<LtvInfoStep>> {
    model.steps.iter().map(assemble_ltv).collect()
}

/// The data-driven iLQR loop starting from open-loop `initial_controls`.
pub fn solve(
    sim: &Simulator,
    initial_controls: &[Vector],
    options: &SolveOptions,
    observer: &mut dyn SolveObserver,
) -> Result<SolveResult> {
    options.validate(sim)?;
    let horizon = initial_controls.len();
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let layout = InfoLayout::new(sim.measurement_dim(), sim.control_dim(), options.q);
    let x0 = sim.plant.initial_state();
    let noisy = !options.noise.is_noiseless();
    let cost = &options.cost;

    let start = Instant::now();
    let before = sim.rollout_count();
    let mut nominal = initial_nominal(
        sim,
        &x0,
        initial_controls,
        &options.noise,
        options.forward_averaging,
    )
    .map_err(|e| e.at_iteration(0))?;
    let mut current = evaluate_cost(&nominal.measurements, &nominal.controls, cost)?;
    let first = IterationRecord {
        iteration: 0,
        cost: current,
        alpha: 0.0,
        residual: f64::NAN,
        accepted: true,
        identification_rollouts: 0,
        forward_rollouts: sim.rollout_count() - before,
        millis: start.elapsed().as_millis() as u64,
    };
    observer.record(&first);
    let mut records = vec![first];

    let mut gains: Option<Vec<Mat>> = None;
    let mut stalls = 0;
    let mut termination = TerminationReason::MaxIterations;

    for iteration in 1..=options.max_iterations {
        let start = Instant::now();
        let step = (|| -> Result<(IterationRecord, Trajectory, Vec<Mat>, bool)> {
            let id_gains = if options.identification_feedback {
                gains.as_deref()
            } else {
                None
            };
            observer.identification_gains(iteration, id_gains);
            let before = sim.rollout_count();
            let dataset = collect_rollouts(
                sim,
                &nominal,
                id_gains,
                &options.plan,
                &options.noise,
                options.q,
                iteration,
            )?;
            let identification_rollouts = sim.rollout_count() - before;
            observer.dataset(iteration, &dataset);
            let model = fit_arma(&dataset, id_gains)?;
            observer.model(iteration, &model);
            let steps = assemble_model(&model)?;
            let bp = backward_pass(
                &steps,
                &nominal.measurements,
                &nominal.controls,
                cost,
                layout,
            )?;
            observer.backward(iteration, &bp);
            let residual = bp.max_residual();

            let settings = ForwardSettings {
                initial_state: &x0,
                noise: &options.noise,
                q: options.q,
                averaging: options.forward_averaging,
                iteration,
            };
            let before = sim.rollout_count();
            let outcome = line_search(
                sim,
                &nominal,
                current,
                &bp,
                cost,
                &options.line_search,
                settings,
            )?;
            let forward_rollouts = sim.rollout_count() - before;

            let control_scale = nominal
                .controls
                .iter()
                .map(|u| (&cost.r * u).norm())
                .fold(1.0, f64::max);
            let converged = residual < options.residual_tol * control_scale;
            let keep_old = !outcome.accepted && !noisy;
            let record = IterationRecord {
                iteration,
                cost: if keep_old { current } else { outcome.cost },
                alpha: outcome.alpha,
                residual,
                accepted: outcome.accepted,
                identification_rollouts,
                forward_rollouts,
                millis: start.elapsed().as_millis() as u64,
            };
            let next = if keep_old {
                nominal.clone()
            } else {
                outcome.trajectory
            };
            Ok((record, next, bp.gains, converged))
        })()
        .map_err(|e| e.at_iteration(iteration))?;

        let (record, next, new_gains, converged) = step;
        let previous = current;
        observer.record(&record);
        let accepted = record.accepted;
        current = record.cost;
        records.push(record);
        nominal = next;
        gains = Some(new_gains);

        if converged {
            termination = TerminationReason::Converged;
            break;
        }
        if accepted {
            stalls = 0;
            if previous - current < options.rel_cost_tol * previous.abs() {
                termination = TerminationReason::CostPlateau;
                break;
            }
        } else if !noisy {
            termination = TerminationReason::LineSearchFailed;
            break;
        } else {
            stalls += 1;
            if stalls >= options.max_stalls {
                termination = TerminationReason::Stalled;
                break;
            }
        }
    }

    let gains = gains.unwrap_or_else(|| vec![Mat::zeros(layout.n_u, layout.dim()); horizon]);
    Ok(SolveResult {
        nominal,
        gains,
        records,
        termination,
    })
}

/// Cost of replaying `controls` open loop without noise from the plant's
/// initial state.
pub fn noiseless_cost(sim: &Simulator, controls: &[Vector], cost: &CostSpec) -> Result<f64> {
    let nominal = initial_nominal(
        sim,
        &sim.plant.initial_state(),
        controls,
        &NoiseSpec::noiseless(0),
        1,
    )?;
    evaluate_cost(&nominal.measurements, &nominal.controls, cost)
}
