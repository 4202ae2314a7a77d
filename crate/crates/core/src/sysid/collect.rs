use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{Mat, Vector};
use crate::plants::noise::{GaussianStream, Stream};
use crate::plants::{
    average_trajectories, ControlPolicy, FeedbackPolicy, FeedbackSpace, NoiseSpec, Purpose,
    RolloutId, Simulator, Trajectory,
};

/// How identification rollouts are excited.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationPlan {
    /// Std of the i.i.d. control perturbations.
    pub perturbation_std: f64,
    /// Perturbation sequences per fit (`n_s`).
    pub rollouts: usize,
    /// Rollouts averaged per perturbation sequence (`n_avg`).
    pub averaging: usize,
    /// Std of the initial-state offset given to each perturbation sequence.
    pub excitation_std: f64,
    pub seed: u64,
}

impl PerturbationPlan {
    pub fn validate(&self, required_rollouts: usize) -> Result<()> {
        if self.perturbation_std <= 0.0 {
            return Err(Error::config("perturbation_std", "must be positive"));
        }
        self.check_collectable(required_rollouts)
    }

    /// Like [`validate`](Self::validate) but admits a zero perturbation std,
    /// which only makes sense for diagnostics.
    pub fn check_collectable(&self, required_rollouts: usize) -> Result<()> {
        if !(self.perturbation_std.is_finite() && self.perturbation_std >= 0.0) {
            return Err(Error::config(
                "perturbation_std",
                "must be finite and non-negative",
            ));
        }
        if !(self.excitation_std.is_finite() && self.excitation_std >= 0.0) {
            return Err(Error::config("excitation_std", "must be non-negative"));
        }
        if self.averaging == 0 {
            return Err(Error::config("averaging", "must be at least 1"));
        }
        if self.rollouts < required_rollouts {
            return Err(Error::TooFewRollouts {
                given: self.rollouts,
                required: required_rollouts,
            });
        }
        Ok(())
    }
}

/// Twice the number of ARMA coefficients per output row.
pub fn min_rollouts(q: usize, n_z: usize, n_u: usize) -> usize {
    2 * q * (n_z + n_u)
}

/// Least-squares data predicting `dz_t` from its lags. Column order is
/// `[dz_{t-1} .. dz_{t-L} | du_{t-1} | du_{t-2} .. du_{t-L}]` with
/// `L = min(q, t)`; the `du_{t-1}` column holds the injected perturbation and
/// the older ones the applied control deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionStep {
    pub t: usize,
    pub lags: usize,
    pub regressors: Mat,
    pub responses: Mat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutDataset {
    pub q: usize,
    pub n_z: usize,
    pub n_u: usize,
    /// One entry per `t = 1..=T`.
    pub steps: Vec<RegressionStep>,
    /// Effective (post-averaging) rollouts per regression.
    pub rollouts: usize,
    /// Plant rollouts actually simulated.
    pub rollouts_executed: usize,
}

struct EffectiveRollout {
    perturbations: Vec<Vector>,
    measurements: Vec<Vector>,
    controls: Vec<Vector>,
}

/// Runs `n_s * n_avg` perturbed rollouts about `nominal`, averaging each group
/// of `n_avg` that shares a perturbation sequence, and builds the per-step
/// regressions. With `gains`, rollouts apply `u = u_bar + du + K_t dZ_t`.
#[allow(clippy::too_many_arguments)]
pub fn collect_rollouts(
    sim: &Simulator,
    nominal: &Trajectory,
    gains: Option<&[Mat]>,
    plan: &PerturbationPlan,
    noise: &NoiseSpec,
    q: usize,
    iteration: usize,
) -> Result<RolloutDataset> {
    nominal.validate()?;
    if q == 0 {
        return Err(Error::InvalidArgument("q must be >= 1".into()));
    }
    let horizon = nominal.horizon();
    let (n_x, n_u, n_z) = (sim.state_dim(), sim.control_dim(), sim.measurement_dim());
    plan.check_collectable(min_rollouts(q, n_z, n_u))?;
    if let Some(k) = gains {
        check_dim("identification gains", horizon, k.len())?;
    }

    let groups: Vec<EffectiveRollout> = (0..plan.rollouts)
        .into_par_iter()
        .map(|g| {
            let key = RolloutId::new(Purpose::Identification, iteration, g, 0);
            let mut pert =
                GaussianStream::new(plan.seed, &key, Stream::Perturbation, plan.perturbation_std);
            let perturbations: Vec<Vector> = (0..horizon).map(|_| pert.sample(n_u)).collect();
            let mut exc =
                GaussianStream::new(plan.seed, &key, Stream::Excitation, plan.excitation_std);
            let x0 = &nominal.states[0] + exc.sample(n_x);

            let policy = match gains {
                Some(k) => ControlPolicy::FeedbackAugmented(FeedbackPolicy {
                    feedforward: nominal.controls.clone(),
                    perturbations: Some(perturbations.clone()),
                    gains: k.to_vec(),
                    reference_measurements: nominal.measurements.clone(),
                    reference_controls: nominal.controls.clone(),
                    space: FeedbackSpace::InformationState,
                    depth: q,
                    pin_initial: false,
                }),
                None => ControlPolicy::OpenLoopPlusPerturbation {
                    controls: nominal.controls.clone(),
                    perturbations: perturbations.clone(),
                },
            };
            let members = (0..plan.averaging)
                .map(|m| {
                    let id = RolloutId::new(Purpose::Identification, iteration, g, m);
                    sim.rollout(&x0, &policy, noise, horizon, id)
                })
                .collect::<Result<Vec<_>>>()?;
            let mean = average_trajectories(&members);
            Ok(EffectiveRollout {
                perturbations,
                measurements: mean.measurements,
                controls: mean.controls,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let z_dev: Vec<Vec<Vector>> = groups
        .iter()
        .map(|r| {
            r.measurements
                .iter()
                .zip(&nominal.measurements)
                .map(|(z, zb)| z - zb)
                .collect()
        })
        .collect();
    let u_dev: Vec<Vec<Vector>> = groups
        .iter()
        .map(|r| {
            r.controls
                .iter()
                .zip(&nominal.controls)
                .map(|(u, ub)| u - ub)
                .collect()
        })
        .collect();

    let steps = (1..=horizon)
        .map(|t| {
            let lags = q.min(t);
            let cols = lags * (n_z + n_u);
            let mut regressors = Mat::zeros(plan.rollouts, cols);
            let mut responses = Mat::zeros(plan.rollouts, n_z);
            for (j, group) in groups.iter().enumerate() {
                let mut c = 0;
                for i in 1..=lags {
                    for k in 0..n_z {
                        regressors[(j, c)] = z_dev[j][t - i][k];
                        c += 1;
                    }
                }
                for k in 0..n_u {
                    regressors[(j, c)] = group.perturbations[t - 1][k];
                    c += 1;
                }
                for i in 2..=lags {
                    for k in 0..n_u {
                        regressors[(j, c)] = u_dev[j][t - i][k];
                        c += 1;
                    }
                }
                for k in 0..n_z {
                    responses[(j, k)] = z_dev[j][t][k];
                }
            }
            RegressionStep {
                t,
                lags,
                regressors,
                responses,
            }
        })
        .collect();

    Ok(RolloutDataset {
        q,
        n_z,
        n_u,
        steps,
        rollouts: plan.rollouts,
        rollouts_executed: plan.rollouts * plan.averaging,
    })
}
