use crate::error::{check_dim, Error, Result};
use crate::info_state::{observability_matrix, ArmaStep, OBSERVABILITY_RANK_TOL};
use crate::linalg::{numerical_rank, pinv, Mat, Vector};
use crate::plants::LinearTimeVarying;

use super::fit::IdentifiedModel;

/// Block matrices relating a window of `q` past measurements to the state,
/// inputs and noise of a known LTV system at time `t`.
///
/// With newest-first stacks `Y = [dz_{t-1}; ..; dz_{t-q}]`,
/// `U = [du_{t-1}; ..; du_{t-q}]`, `W = [w_{t-1}; ..; w_{t-q}]` and
/// `V = [v_{t-1}; ..; v_{t-q}]`:
///
/// ```text
/// Y    = O dx_{t-q} + G U + G_w W + V
/// dz_t = M dx_{t-q} + H U + H_w W + v_t
///      = alpha Y + beta U + beta_d W - alpha V + v_t
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseStacks {
    pub observability: Mat,
    pub g_q: Mat,
    pub g_q_omega: Mat,
    pub m: Mat,
    pub h: Mat,
    pub h_omega: Mat,
    pub beta_d: Mat,
}

fn toeplitz(
    truth: &LinearTimeVarying,
    q: usize,
    t: usize,
    input: impl Fn(usize) -> Mat,
) -> (Mat, Mat) {
    let n_z = truth.measurement_dim();
    let n_in = input(t - 1).ncols();
    let mut g = Mat::zeros(q * n_z, q * n_in);
    let mut h = Mat::zeros(n_z, q * n_in);
    for j in 1..=q {
        let src = t - j;
        let b = input(src);
        for i in 1..j {
            let block = &truth.c[t - i] * truth.transition(src + 1, t - i) * &b;
            g.view_mut(((i - 1) * n_z, (j - 1) * n_in), (n_z, n_in))
                .copy_from(&block);
        }
        let block = &truth.c[t] * truth.transition(src + 1, t) * &b;
        h.view_mut((0, (j - 1) * n_in), (n_z, n_in))
            .copy_from(&block);
    }
    (g, h)
}

fn require_observable(truth: &LinearTimeVarying, q: usize, t: usize) -> Result<Mat> {
    let o = observability_matrix(truth, q, t)?;
    let rank = numerical_rank(&o, OBSERVABILITY_RANK_TOL);
    if rank < o.ncols() {
        return Err(Error::Unobservable {
            t,
            q,
            rank,
            required: o.ncols(),
        });
    }
    Ok(o)
}

pub fn noise_stacks(truth: &LinearTimeVarying, q: usize, t: usize) -> Result<NoiseStacks> {
    let o = require_observable(truth, q, t)?;
    let n_x = truth.state_dim();
    let (g_q, h) = toeplitz(truth, q, t, |s| truth.b[s].clone());
    let (g_q_omega, h_omega) = toeplitz(truth, q, t, |_| Mat::identity(n_x, n_x));
    let m = &truth.c[t] * truth.transition(t - q, t);
    let alpha = &m * pinv(&o, OBSERVABILITY_RANK_TOL);
    let beta_d = &h_omega - &alpha * &g_q_omega;
    Ok(NoiseStacks {
        observability: o,
        g_q,
        g_q_omega,
        m,
        h,
        h_omega,
        beta_d,
    })
}

/// Exact ARMA coefficients of a known LTV system at time `t >= q`.
pub fn arma_from_ltv(truth: &LinearTimeVarying, q: usize, t: usize) -> Result<ArmaStep> {
    let o = require_observable(truth, q, t)?;
    let (g, h) = toeplitz(truth, q, t, |s| truth.b[s].clone());
    let m = &truth.c[t] * truth.transition(t - q, t);
    let alpha = &m * pinv(&o, OBSERVABILITY_RANK_TOL);
    let beta = &h - &alpha * &g;
    let (n_z, n_u) = (truth.measurement_dim(), truth.control_dim());
    let mut coeffs = Mat::zeros(n_z, q * (n_z + n_u));
    coeffs.view_mut((0, 0), (n_z, q * n_z)).copy_from(&alpha);
    coeffs
        .view_mut((0, q * n_z), (n_z, q * n_u))
        .copy_from(&beta);
    Ok(ArmaStep::from_coefficient_matrix(t, &coeffs, n_z, n_u, q))
}

/// Newest-first stack `[x_{t-1}; ..; x_{t-q}]` of an absolute-time sequence.
pub fn stack_window(seq: &[Vector], q: usize, t: usize) -> Vector {
    let refs: Vec<&Vector> = (1..=q).map(|i| &seq[t - i]).collect();
    crate::linalg::stack(&refs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiasReport {
    pub t: Vec<usize>,
    /// Frobenius norm of `[alpha | beta]` error per step.
    pub errors: Vec<f64>,
    pub mean: f64,
    pub max: f64,
    pub median: f64,
}

/// Compares identified steps against reference steps with matching `t`.
/// Steps without a reference are skipped.
pub fn bias_report(identified: &IdentifiedModel, truth: &[ArmaStep]) -> Result<BiasReport> {
    let mut ts = Vec::new();
    let mut errors = Vec::new();
    for reference in truth {
        let Some(step) = identified.step_at(reference.t) else {
            continue;
        };
        let a = step.coefficient_matrix();
        let b = reference.coefficient_matrix();
        check_dim("bias report coefficients", b.len(), a.len())?;
        ts.push(reference.t);
        errors.push((a - b).norm());
    }
    if errors.is_empty() {
        return Err(Error::InvalidArgument(
            "no overlapping timesteps for bias report".into(),
        ));
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let max = errors.iter().cloned().fold(0.0, f64::max);
    let mut sorted = errors.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Ok(BiasReport {
        t: ts,
        errors,
        mean,
        max,
        median,
    })
}
