use crate::error::{check_dim, Error, Result};
use crate::info_state::{ArmaStep, InfoLayout};
use crate::linalg::Mat;

use super::collect::{RegressionStep, RolloutDataset};

/// Column-equilibrated regressors above this condition number are rejected
/// as rank deficient.
pub const MAX_REGRESSOR_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct IdentifiedModel {
    pub q: usize,
    /// One step per `t = 1..=T`; `steps[s]` describes the transition out of time `s`.
    pub steps: Vec<ArmaStep>,
    /// Frobenius norm of the least-squares residual per step.
    pub residual_norms: Vec<f64>,
    /// Condition number of the column-equilibrated regressor per step.
    pub condition_numbers: Vec<f64>,
}

impl IdentifiedModel {
    pub fn step_at(&self, t: usize) -> Option<&ArmaStep> {
        self.steps.iter().find(|s| s.t == t)
    }
}

/// Least-squares ARMA fit of every step of `dataset`. When the rollouts were
/// collected with feedback gains, pass the same gains so the closed-loop
/// coefficients are mapped back to the open-loop model.
pub fn fit_arma(dataset: &RolloutDataset, gains_used: Option<&[Mat]>) -> Result<IdentifiedModel> {
    let layout = InfoLayout::new(dataset.n_z, dataset.n_u, dataset.q);
    if let Some(k) = gains_used {
        check_dim("debias gains", dataset.steps.len(), k.len())?;
    }
    let mut steps = Vec::with_capacity(dataset.steps.len());
    let mut residual_norms = Vec::with_capacity(dataset.steps.len());
    let mut condition_numbers = Vec::with_capacity(dataset.steps.len());
    for step in &dataset.steps {
        let (mut coeffs, residual, condition) = solve_step(step)?;
        if let Some(k) = gains_used {
            remove_feedback(&mut coeffs, &k[step.t - 1], step.lags, layout);
        }
        steps.push(pad_to_depth(step.t, &coeffs, step.lags, layout));
        residual_norms.push(residual);
        condition_numbers.push(condition);
    }
    Ok(IdentifiedModel {
        q: dataset.q,
        steps,
        residual_norms,
        condition_numbers,
    })
}

/// Returns the `n_z x p` coefficient matrix, the residual norm and the
/// condition number.
fn solve_step(step: &RegressionStep) -> Result<(Mat, f64, f64)> {
    let x = &step.regressors;
    let (rows, cols) = x.shape();
    if rows < cols {
        return Err(Error::TooFewRollouts {
            given: rows,
            required: cols,
        });
    }
    let scale: Vec<f64> = (0..cols).map(|j| x.column(j).norm()).collect();
    if scale.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::RankDeficient {
            t: step.t,
            condition: f64::INFINITY,
        });
    }
    let mut xs = x.clone();
    for (j, s) in scale.iter().enumerate() {
        xs.column_mut(j).unscale_mut(*s);
    }
    let singular = xs.singular_values();
    let max = singular.max();
    let min = singular.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_REGRESSOR_CONDITION) {
        return Err(Error::RankDeficient {
            t: step.t,
            condition,
        });
    }
    let qr = xs.qr();
    let qty = qr.q().transpose() * &step.responses;
    let mut theta = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient {
            t: step.t,
            condition,
        })?;
    for (j, s) in scale.iter().enumerate() {
        theta.row_mut(j).unscale_mut(*s);
    }
    let residual = (&step.responses - x * &theta).norm();
    let coeffs = theta.transpose();
    if !crate::linalg::all_finite(&coeffs) {
        return Err(Error::NonFinite("ARMA coefficients"));
    }
    Ok((coeffs, residual, condition))
}

/// The regression sees `u_{t-1} = du_{t-1} + K dZ_{t-1}`, so the fitted
/// information-state coefficients are `top + beta_1 K`. Subtract the feedback
/// part on the columns that were in the regressor.
fn remove_feedback(coeffs: &mut Mat, gain: &Mat, lags: usize, layout: InfoLayout) {
    let (n_z, n_u) = (layout.n_z, layout.n_u);
    let beta1 = coeffs.view((0, lags * n_z), (n_z, n_u)).into_owned();
    for i in 1..=lags {
        let k = gain.view((0, layout.z_offset(i - 1)), (n_u, n_z));
        let correction = &beta1 * k;
        let mut block = coeffs.view_mut((0, (i - 1) * n_z), (n_z, n_z));
        block -= correction;
    }
    for i in 2..=lags {
        let k = gain.view((0, layout.u_offset(i - 2)), (n_u, n_u));
        let correction = &beta1 * k;
        let col = lags * n_z + (i - 1) * n_u;
        let mut block = coeffs.view_mut((0, col), (n_z, n_u));
        block -= correction;
    }
}

fn pad_to_depth(t: usize, coeffs: &Mat, lags: usize, layout: InfoLayout) -> ArmaStep {
    let (n_z, n_u, q) = (layout.n_z, layout.n_u, layout.q);
    let alphas = (0..q)
        .map(|i| {
            if i < lags {
                coeffs.view((0, i * n_z), (n_z, n_z)).into_owned()
            } else {
                Mat::zeros(n_z, n_z)
            }
        })
        .collect();
    let betas = (0..q)
        .map(|i| {
            if i < lags {
                coeffs
                    .view((0, lags * n_z + i * n_u), (n_z, n_u))
                    .into_owned()
            } else {
                Mat::zeros(n_z, n_u)
            }
        })
        .collect();
    ArmaStep { t, alphas, betas }
}

/// Recovers the open-loop `(A, B)` from a fully observed fit made under
/// feedback `u = u_bar + du + K dx`: `A = A_hat - B_hat K`, `B = B_hat`.
pub fn debias_full_state(a_hat: &Mat, b_hat: &Mat, gain: &Mat) -> Result<(Mat, Mat)> {
    check_dim("debias A rows", a_hat.nrows(), b_hat.nrows())?;
    check_dim("debias A square", a_hat.nrows(), a_hat.ncols())?;
    check_dim("debias gain rows", b_hat.ncols(), gain.nrows())?;
    check_dim("debias gain cols", a_hat.ncols(), gain.ncols())?;
    Ok((a_hat - b_hat * gain, b_hat.clone()))
}
