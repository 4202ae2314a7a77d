use crate::error::{check_dim, Error, Result};
use crate::info_state::InfoLayout;
use crate::linalg::{all_finite, min_eigenvalue, Mat, Vector};

/// Quadratic cost on measurements and controls:
///
/// ```text
/// J = sum_{t<T} (z~_t' Q z~_t + u_t' R u_t) + z~_T' Q_T z~_T,   z~ = z - target
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct CostSpec {
    pub q: Mat,
    pub r: Mat,
    pub q_terminal: Mat,
    pub target: Vector,
}

impl CostSpec {
    pub fn measurement_dim(&self) -> usize {
        self.target.len()
    }

    pub fn control_dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n_z = self.measurement_dim();
        for (name, m, n) in [
            ("Q", &self.q, n_z),
            ("Q_T", &self.q_terminal, n_z),
            ("R", &self.r, self.r.nrows()),
        ] {
            check_dim(name, n, m.nrows())?;
            check_dim(name, n, m.ncols())?;
            if !all_finite(m) {
                return Err(Error::NonFinite("cost matrix"));
            }
            if (m - m.transpose()).abs().max() > 1e-12 * (1.0 + m.abs().max()) {
                return Err(Error::InvalidArgument(format!(
                    "cost matrix {name} is not symmetric"
                )));
            }
        }
        if min_eigenvalue(&self.q) < -1e-12 || min_eigenvalue(&self.q_terminal) < -1e-12 {
            return Err(Error::InvalidArgument(
                "Q and Q_T must be positive semidefinite".into(),
            ));
        }
        if min_eigenvalue(&self.r) <= 0.0 {
            return Err(Error::InvalidArgument("R must be positive definite".into()));
        }
        Ok(())
    }

    pub fn running(&self, z: &Vector, u: &Vector) -> f64 {
        let e = z - &self.target;
        e.dot(&(&self.q * &e)) + u.dot(&(&self.r * u))
    }

    pub fn terminal(&self, z: &Vector) -> f64 {
        let e = z - &self.target;
        e.dot(&(&self.q_terminal * &e))
    }

    /// Gradient of the running state cost in information-state coordinates.
    /// Half-scaled: `Q z~` embedded in the newest measurement block.
    pub fn info_gradient(&self, z: &Vector, layout: InfoLayout, terminal: bool) -> Vector {
        let w = if terminal { &self.q_terminal } else { &self.q };
        let mut g = Vector::zeros(layout.dim());
        g.rows_mut(0, layout.n_z)
            .copy_from(&(w * (z - &self.target)));
        g
    }

    /// Half-scaled Hessian: `Q` in the newest measurement block, zero elsewhere.
    pub fn info_hessian(&self, layout: InfoLayout, terminal: bool) -> Mat {
        let w = if terminal { &self.q_terminal } else { &self.q };
        let mut h = Mat::zeros(layout.dim(), layout.dim());
        h.view_mut((0, 0), (layout.n_z, layout.n_z)).copy_from(w);
        h
    }
}

pub fn evaluate_cost(measurements: &[Vector], controls: &[Vector], cost: &CostSpec) -> Result<f64> {
    check_dim("cost measurements", controls.len() + 1, measurements.len())?;
    let n_z = cost.measurement_dim();
    let n_u = cost.control_dim();
    let mut j = 0.0;
    for (z, u) in measurements.iter().zip(controls) {
        check_dim("cost measurement", n_z, z.len())?;
        check_dim("cost control", n_u, u.len())?;
        j += cost.running(z, u);
    }
    let last = measurements.last().expect("at least one measurement");
    check_dim("cost measurement", n_z, last.len())?;
    j += cost.terminal(last);
    if !j.is_finite() {
        return Err(Error::NonFinite("cost"));
    }
    Ok(j)
}
