use super::cost::CostSpec;
use crate::error::{check_dim, Error, Result};
use crate::info_state::{InfoLayout, LtvInfoStep};
use crate::linalg::{all_finite, condition_number, symmetrize, Mat, Vector};

/// Control Hessians above this condition number get a Levenberg shift.
pub const MAX_HESSIAN_CONDITION: f64 = 1e10;
const INITIAL_SHIFT: f64 = 1e-6;
const MAX_SHIFT: f64 = 1e6;

#[derive(Clone, Debug)]
pub struct BackwardPassResult {
    /// `v_0 ..= v_T`
    pub v: Vec<Vector>,
    /// `V_0 ..= V_T`
    pub value_hessians: Vec<Mat>,
    /// Feedforward gains `k_0 .. k_{T-1}`; the update is `u = u_bar + alpha k + K dZ`.
    pub k: Vec<Vector>,
    pub gains: Vec<Mat>,
    /// Open-loop costate `lambda_t = l_Z + A' lambda_{t+1}`, `lambda_0 ..= lambda_T`.
    pub costate: Vec<Vector>,
    /// `R u_bar_t + B_t' lambda_{t+1}`, which is half the gradient of the
    /// total cost with respect to `u_bar_t`.
    pub residuals: Vec<Vector>,
    /// `sum_t k_t' (R + B' V B) k_t`
    pub expected_reduction: f64,
    /// Largest Levenberg shift that was needed; zero when none was.
    pub max_shift: f64,
}

impl BackwardPassResult {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.norm()).fold(0.0, f64::max)
    }

    pub fn horizon(&self) -> usize {
        self.k.len()
    }
}

/// Expanded Riccati step `Q + A'VA - A'VB (R + B'VB)^{-1} B'VA`.
pub fn riccati_step_expanded(a: &Mat, b: &Mat, v_next: &Mat, l_zz: &Mat, r: &Mat) -> Result<Mat> {
    let quu = r + b.transpose() * v_next * b;
    let qux = b.transpose() * v_next * a;
    let chol = quu
        .cholesky()
        .ok_or(Error::SingularControlHessian { t: 0 })?;
    let mut v = l_zz + a.transpose() * v_next * a - qux.transpose() * chol.solve(&qux);
    symmetrize(&mut v);
    Ok(v)
}

/// Inverse-form Riccati step `Q + A' (V^{-1} + B R^{-1} B')^{-1} A`.
/// Needs an invertible `V_{t+1}`.
pub fn riccati_step_inverse(a: &Mat, b: &Mat, v_next: &Mat, l_zz: &Mat, r: &Mat) -> Result<Mat> {
    let v_inv = v_next
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("V_{t+1} is singular".into()))?;
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or(Error::SingularControlHessian { t: 0 })?;
    let inner = (v_inv + b * r_inv * b.transpose())
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("inverse-form middle factor is singular".into()))?;
    let mut v = l_zz + a.transpose() * inner * a;
    symmetrize(&mut v);
    Ok(v)
}

/// Riccati recursion over information-state dynamics `steps[t]` (`t -> t+1`)
/// about a nominal with measurements `z_0 ..= z_T` and controls `u_0 .. u_{T-1}`.
pub fn backward_pass(
    steps: &[LtvInfoStep],
    measurements: &[Vector],
    controls: &[Vector],
    cost: &CostSpec,
    layout: InfoLayout,
) -> Result<BackwardPassResult> {
    let horizon = steps.len();
    check_dim("backward pass controls", horizon, controls.len())?;
    check_dim(
        "backward pass measurements",
        horizon + 1,
        measurements.len(),
    )?;
    check_dim("cost measurement dim", layout.n_z, cost.measurement_dim())?;
    check_dim("cost control dim", layout.n_u, cost.control_dim())?;
    let dim = layout.dim();
    for s in steps {
        check_dim("info-state A rows", dim, s.a.nrows())?;
        check_dim("info-state A cols", dim, s.a.ncols())?;
        check_dim("info-state B rows", dim, s.b.nrows())?;
        check_dim("info-state B cols", layout.n_u, s.b.ncols())?;
    }

    let mut v = vec![Vector::zeros(dim); horizon + 1];
    let mut vv = vec![Mat::zeros(dim, dim); horizon + 1];
    let mut lambda = vec![Vector::zeros(dim); horizon + 1];
    let mut k = vec![Vector::zeros(layout.n_u); horizon];
    let mut gains = vec![Mat::zeros(layout.n_u, dim); horizon];
    let mut residuals = vec![Vector::zeros(layout.n_u); horizon];
    let mut expected = 0.0;
    let mut max_shift: f64 = 0.0;

    v[horizon] = cost.info_gradient(&measurements[horizon], layout, true);
    vv[horizon] = cost.info_hessian(layout, true);
    lambda[horizon] = v[horizon].clone();
    let l_zz = cost.info_hessian(layout, false);

    for t in (0..horizon).rev() {
        let (a, b) = (&steps[t].a, &steps[t].b);
        let l_z = cost.info_gradient(&measurements[t], layout, false);
        let bt = b.transpose();
        let ru = &cost.r * &controls[t];

        let qu = &ru + &bt * &v[t + 1];
        let qux = &bt * &vv[t + 1] * a;
        let quu = &cost.r + &bt * &vv[t + 1] * b;

        let (chol, shift) = regularized_cholesky(&quu, t)?;
        max_shift = max_shift.max(shift);
        k[t] = -chol.solve(&qu);
        gains[t] = -chol.solve(&qux);
        expected += k[t].dot(&(&quu * &k[t]));

        v[t] = &l_z + a.transpose() * &v[t + 1] + qux.transpose() * &k[t];
        let mut vt = &l_zz + a.transpose() * &vv[t + 1] * a + qux.transpose() * &gains[t];
        symmetrize(&mut vt);
        vv[t] = vt;

        residuals[t] = &ru + &bt * &lambda[t + 1];
        lambda[t] = &l_z + a.transpose() * &lambda[t + 1];

        if !all_finite(&vv[t]) || !v[t].iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("value function"));
        }
    }

    Ok(BackwardPassResult {
        v,
        value_hessians: vv,
        k,
        gains,
        costate: lambda,
        residuals,
        expected_reduction: expected,
        max_shift,
    })
}

fn regularized_cholesky(
    quu: &Mat,
    t: usize,
) -> Result<(nalgebra::Cholesky<f64, nalgebra::Dyn>, f64)> {
    if !all_finite(quu) {
        return Err(Error::SingularControlHessian { t });
    }
    if condition_number(quu) <= MAX_HESSIAN_CONDITION {
        if let Some(c) = quu.clone().cholesky() {
            return Ok((c, 0.0));
        }
    }
    let n = quu.nrows();
    let mut mu = INITIAL_SHIFT;
    while mu <= MAX_SHIFT {
        let shifted = quu + Mat::identity(n, n) * mu;
        if condition_number(&shifted) <= MAX_HESSIAN_CONDITION {
            if let Some(c) = shifted.cholesky() {
                return Ok((c, mu));
            }
        }
        mu *= 10.0;
    }
    Err(Error::SingularControlHessian { t })
}
