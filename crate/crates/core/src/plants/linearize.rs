use super::{PlantModel, Trajectory};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, Mat};

/// Ground-truth `(A_t, B_t, C_t)` along a trajectory. `a[s]`, `b[s]` map time
/// `s` to `s + 1`; `c[s]` is the sensor at time `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearTimeVarying {
    pub a: Vec<Mat>,
    pub b: Vec<Mat>,
    pub c: Vec<Mat>,
}

impl LinearTimeVarying {
    pub fn from_linearization(lin: Vec<(Mat, Mat)>, selector: &Mat) -> Self {
        let steps = lin.len();
        let (a, b) = lin.into_iter().unzip();
        LinearTimeVarying {
            a,
            b,
            c: vec![selector.clone(); steps + 1],
        }
    }

    pub fn state_dim(&self) -> usize {
        self.a[0].nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.b[0].ncols()
    }

    pub fn measurement_dim(&self) -> usize {
        self.c[0].nrows()
    }

    pub fn horizon(&self) -> usize {
        self.a.len()
    }

    /// State transition `A_{to-1} ... A_{from}`; identity when `from == to`.
    pub fn transition(&self, from: usize, to: usize) -> Mat {
        let n = self.state_dim();
        let mut m = Mat::identity(n, n);
        for s in from..to {
            m = &self.a[s] * m;
        }
        m
    }

    pub(crate) fn check_range(&self, from: usize, to: usize) -> Result<()> {
        if to > self.horizon() || to >= self.c.len() || from > to {
            return Err(Error::InvalidArgument(format!(
                "time range {from}..={to} outside LTV data of horizon {}",
                self.horizon()
            )));
        }
        Ok(())
    }
}

/// Central finite-difference Jacobians of the noiseless step map about each
/// `(x_t, u_t)` of `nominal`.
pub fn linearize_fd(plant: &PlantModel, nominal: &Trajectory) -> Result<Vec<(Mat, Mat)>> {
    linearize_fd_with_step(plant, nominal, 1e-5)
}

pub fn linearize_fd_with_step(
    plant: &PlantModel,
    nominal: &Trajectory,
    h: f64,
) -> Result<Vec<(Mat, Mat)>> {
    nominal.validate()?;
    let (n_x, n_u) = (plant.state_dim(), plant.control_dim());
    let mut out = Vec::with_capacity(nominal.horizon());
    for t in 0..nominal.horizon() {
        let x = &nominal.states[t];
        let u = &nominal.controls[t];
        check_dim("linearize state", n_x, x.len())?;
        check_dim("linearize control", n_u, u.len())?;
        let mut a = Mat::zeros(n_x, n_x);
        for j in 0..n_x {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += h;
            xm[j] -= h;
            let d = (plant.drift(t, &xp, u) - plant.drift(t, &xm, u)) / (2.0 * h);
            a.set_column(j, &d);
        }
        let mut b = Mat::zeros(n_x, n_u);
        for j in 0..n_u {
            let (mut up, mut um) = (u.clone(), u.clone());
            up[j] += h;
            um[j] -= h;
            let d = (plant.drift(t, x, &up) - plant.drift(t, x, &um)) / (2.0 * h);
            b.set_column(j, &d);
        }
        if !all_finite(&a) || !all_finite(&b) {
            return Err(Error::NonFinite("finite-difference Jacobian"));
        }
        out.push((a, b));
    }
    Ok(out)
}
