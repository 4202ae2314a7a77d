use rayon::prelude::*;

use super::backward::BackwardPassResult;
use super::cost::{evaluate_cost, CostSpec};
use crate::error::{check_dim, Error, Result};
use crate::linalg::Vector;
use crate::plants::{
    average_trajectories, ControlPolicy, FeedbackPolicy, FeedbackSpace, NoiseSpec, Purpose,
    RolloutId, Simulator, Trajectory,
};

/// Shared settings for forward rollouts within one iteration.
#[derive(Clone, Copy, Debug)]
pub struct ForwardSettings<'a> {
    pub initial_state: &'a Vector,
    pub noise: &'a NoiseSpec,
    pub q: usize,
    /// Rollouts averaged into the new nominal.
    pub averaging: usize,
    pub iteration: usize,
}

/// Runs the update law `u_t = u_bar_t + alpha k_t + K_t (Z_t^new - Z_t^old)`
/// closed loop, stepwise against the old nominal, with the deviation at
/// `t = 0` pinned to zero. Every candidate of one iteration sees the same
/// noise realizations.
pub fn forward_update(
    sim: &Simulator,
    nominal: &Trajectory,
    bp: &BackwardPassResult,
    alpha: f64,
    settings: ForwardSettings<'_>,
    cost: &CostSpec,
) -> Result<(Trajectory, f64)> {
    let horizon = nominal.horizon();
    check_dim("forward gains", horizon, bp.horizon())?;
    if settings.averaging == 0 {
        return Err(Error::InvalidArgument(
            "forward averaging must be >= 1".into(),
        ));
    }
    let feedforward = nominal
        .controls
        .iter()
        .zip(&bp.k)
        .map(|(u, k)| u + k * alpha)
        .collect();
    let policy = ControlPolicy::FeedbackAugmented(FeedbackPolicy {
        feedforward,
        perturbations: None,
        gains: bp.gains.clone(),
        reference_measurements: nominal.measurements.clone(),
        reference_controls: nominal.controls.clone(),
        space: FeedbackSpace::InformationState,
        depth: settings.q,
        pin_initial: true,
    });
    let members = (0..settings.averaging)
        .into_par_iter()
        .map(|m| {
            let id = RolloutId::new(Purpose::Forward, settings.iteration, 0, m);
            sim.rollout(settings.initial_state, &policy, settings.noise, horizon, id)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = average_trajectories(&members);
    let j = evaluate_cost(&mean.measurements, &mean.controls, cost)?;
    Ok((mean, j))
}

/// Step lengths tried in order and the sufficient-decrease constant.
#[derive(Clone, Debug, PartialEq)]
pub struct LineSearchOptions {
    pub schedule: Vec<f64>,
    pub c1: f64,
}

impl Default for LineSearchOptions {
    fn default() -> Self {
        LineSearchOptions {
            schedule: (0..16).map(|i| 0.7f64.powi(i)).collect(),
            c1: 1e-4,
        }
    }
}

impl LineSearchOptions {
    pub fn validate(&self) -> Result<()> {
        let s = &self.schedule;
        if s.is_empty()
            || s[0] != 1.0
            || s.windows(2).any(|w| w[1] >= w[0])
            || s.iter().any(|&a| a <= 0.0)
        {
            return Err(Error::InvalidArgument(
                "line-search schedule must start at 1 and strictly decrease towards 0".into(),
            ));
        }
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return Err(Error::InvalidArgument(
                "Armijo constant must be in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LineSearchOutcome {
    pub alpha: f64,
    pub trajectory: Trajectory,
    pub cost: f64,
    /// False when no step met the sufficient-decrease test and the smallest
    /// surviving step was returned instead.
    pub accepted: bool,
    pub candidates: usize,
}

pub fn line_search(
    sim: &Simulator,
    nominal: &Trajectory,
    current_cost: f64,
    bp: &BackwardPassResult,
    cost: &CostSpec,
    options: &LineSearchOptions,
    settings: ForwardSettings<'_>,
) -> Result<LineSearchOutcome> {
    options.validate()?;
    let mut fallback = None;
    let mut candidates = 0;
    for &alpha in &options.schedule {
        candidates += 1;
        match forward_update(sim, nominal, bp, alpha, settings, cost) {
            Ok((trajectory, j)) => {
                if j <= current_cost - options.c1 * alpha * bp.expected_reduction {
                    return Ok(LineSearchOutcome {
                        alpha,
                        trajectory,
                        cost: j,
                        accepted: true,
                        candidates,
                    });
                }
                fallback = Some((alpha, trajectory, j));
            }
            Err(e) if e.is_divergence() => {}
            Err(e) => return Err(e),
        }
    }
    match fallback {
        Some((alpha, trajectory, cost)) => Ok(LineSearchOutcome {
            alpha,
            trajectory,
            cost,
            accepted: false,
            candidates,
        }),
        None => Err(Error::LineSearchDiverged),
    }
}
