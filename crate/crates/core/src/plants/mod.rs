//! Simulated black-box plants. The optimizer only reaches them through
//! [`Simulator::rollout`].

mod cartpole;
mod linearize;
mod ltv;
pub mod noise;
mod pendulum;
mod policy;
mod rollout;

pub use cartpole::Cartpole;
pub use linearize::{linearize_fd, linearize_fd_with_step, LinearTimeVarying};
pub use ltv::SyntheticLtv;
pub use noise::{NoiseSpec, Purpose, RolloutId};
pub use pendulum::Pendulum;
pub use policy::{ControlPolicy, FeedbackPolicy, FeedbackSpace};
pub use rollout::{average_trajectories, rollout, Simulator};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{Mat, Vector};

/// State magnitude beyond which a rollout is treated as diverged.
pub const DIVERGENCE_BOUND: f64 = 1e6;

pub type PlantState = Vector;
pub type Control = Vector;
pub type Measurement = Vector;

#[derive(Clone, Debug, PartialEq)]
pub enum PlantModel {
    Pendulum(Pendulum),
    Cartpole(Cartpole),
    SyntheticLtv(SyntheticLtv),
}

impl PlantModel {
    pub fn name(&self) -> &'static str {
        match self {
            PlantModel::Pendulum(_) => "pendulum",
            PlantModel::Cartpole(_) => "cartpole",
            PlantModel::SyntheticLtv(_) => "synthetic_ltv",
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            PlantModel::Pendulum(_) => 2,
            PlantModel::Cartpole(_) => 4,
            PlantModel::SyntheticLtv(p) => p.a[0].nrows(),
        }
    }

    pub fn control_dim(&self) -> usize {
        match self {
            PlantModel::Pendulum(_) | PlantModel::Cartpole(_) => 1,
            PlantModel::SyntheticLtv(p) => p.b[0].ncols(),
        }
    }

    /// State components a positions-only sensor reports.
    pub fn position_indices(&self) -> Vec<usize> {
        match self {
            PlantModel::Pendulum(_) => vec![0],
            PlantModel::Cartpole(_) => vec![0, 1],
            PlantModel::SyntheticLtv(p) => (0..p.positions).collect(),
        }
    }

    pub fn dt(&self) -> f64 {
        match self {
            PlantModel::Pendulum(p) => p.dt,
            PlantModel::Cartpole(p) => p.dt,
            PlantModel::SyntheticLtv(_) => 1.0,
        }
    }

    /// Default start of the swing-up task (hanging), or the synthetic plant's
    /// configured initial state.
    pub fn initial_state(&self) -> PlantState {
        match self {
            PlantModel::Pendulum(_) => Pendulum::hanging(),
            PlantModel::Cartpole(_) => Cartpole::hanging(),
            PlantModel::SyntheticLtv(p) => p.initial_state.clone(),
        }
    }

    /// Deterministic part of the transition, `f(x_t, u_t)`.
    pub fn drift(&self, t: usize, state: &PlantState, control: &Control) -> PlantState {
        match self {
            PlantModel::Pendulum(p) => p.drift(state, control),
            PlantModel::Cartpole(p) => p.drift(state, control),
            PlantModel::SyntheticLtv(p) => p.drift(t, state, control),
        }
    }

    /// `x_{t+1} = f(x_t, u_t) + w_t`.
    pub fn step(
        &self,
        t: usize,
        state: &PlantState,
        control: &Control,
        process_noise: &Vector,
    ) -> Result<PlantState> {
        check_dim("step state", self.state_dim(), state.len())?;
        check_dim("step control", self.control_dim(), control.len())?;
        check_dim("step process noise", self.state_dim(), process_noise.len())?;
        if !state
            .iter()
            .chain(control.iter())
            .chain(process_noise.iter())
            .all(|v| v.is_finite())
        {
            return Err(Error::NonFinite("step input"));
        }
        Ok(self.drift(t, state, control) + process_noise)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObservationMode {
    FullState,
    PositionsOnly,
}

/// Linear selector sensor `z = C x + v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sensor {
    pub mode: ObservationMode,
    pub selector: Mat,
}

impl Sensor {
    pub fn new(mode: ObservationMode, plant: &PlantModel) -> Self {
        let n = plant.state_dim();
        let selector = match mode {
            ObservationMode::FullState => Mat::identity(n, n),
            ObservationMode::PositionsOnly => {
                let idx = plant.position_indices();
                let mut c = Mat::zeros(idx.len(), n);
                for (row, &col) in idx.iter().enumerate() {
                    c[(row, col)] = 1.0;
                }
                c
            }
        };
        Sensor { mode, selector }
    }

    pub fn measurement_dim(&self) -> usize {
        self.selector.nrows()
    }

    pub fn observe(&self, state: &PlantState, noise: &Vector) -> Result<Measurement> {
        check_dim("observe state", self.selector.ncols(), state.len())?;
        check_dim("observe noise", self.selector.nrows(), noise.len())?;
        Ok(&self.selector * state + noise)
    }
}

/// States and measurements for `t = 0..=T`, controls for `t = 0..T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<PlantState>,
    pub controls: Vec<Control>,
    pub measurements: Vec<Measurement>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.controls.len()
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.horizon();
        check_dim("trajectory states", t + 1, self.states.len())?;
        check_dim("trajectory measurements", t + 1, self.measurements.len())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn zero(n: usize) -> Vector {
        Vector::zeros(n)
    }

    #[test]
    fn pendulum_equilibria_are_fixed_points() {
        let p = PlantModel::Pendulum(Pendulum::default());
        for theta in [0.0, PI] {
            let x = Vector::from_vec(vec![theta, 0.0]);
            let next = p.step(0, &x, &zero(1), &zero(2)).unwrap();
            assert!((next[0] - theta).abs() < 1e-15);
            assert!(next[1].abs() < 1e-15);
        }
    }

    #[test]
    fn upright_is_unstable() {
        let p = PlantModel::Pendulum(Pendulum::default());
        let x = Vector::from_vec(vec![0.01, 0.0]);
        let next = p.step(0, &x, &zero(1), &zero(2)).unwrap();
        assert!(next[1] > 0.0 && next[0] > 0.01);
    }

    #[test]
    fn step_rejects_bad_input() {
        let p = PlantModel::Cartpole(Cartpole::default());
        assert!(matches!(
            p.step(0, &zero(3), &zero(1), &zero(4)),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut x = zero(4);
        x[2] = f64::NAN;
        assert!(matches!(
            p.step(0, &x, &zero(1), &zero(4)),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn positions_only_selects_positions() {
        let cp = PlantModel::Cartpole(Cartpole::default());
        let s = Sensor::new(ObservationMode::PositionsOnly, &cp);
        let x = Vector::from_vec(vec![0.3, -1.2, 4.0, 5.0]);
        assert_eq!(
            s.observe(&x, &zero(2)).unwrap(),
            Vector::from_vec(vec![0.3, -1.2])
        );

        let pd = PlantModel::Pendulum(Pendulum::default());
        let s = Sensor::new(ObservationMode::PositionsOnly, &pd);
        let x = Vector::from_vec(vec![2.5, -7.0]);
        assert_eq!(
            s.observe(&x, &zero(1)).unwrap(),
            Vector::from_vec(vec![2.5])
        );
    }

    #[test]
    fn full_state_observation_is_identity() {
        let cp = PlantModel::Cartpole(Cartpole::default());
        let s = Sensor::new(ObservationMode::FullState, &cp);
        let x = Vector::from_vec(vec![0.3, -1.2, 4.0, 5.0]);
        let next = cp
            .step(0, &x, &Vector::from_vec(vec![0.7]), &zero(4))
            .unwrap();
        assert_eq!(s.observe(&next, &zero(4)).unwrap(), next);
        assert!(s.observe(&x, &zero(2)).is_err());
    }

    #[test]
    fn selector_rows_have_single_one() {
        let p = PlantModel::SyntheticLtv(SyntheticLtv::random(4, 1, 2, 5, true, 3));
        let s = Sensor::new(ObservationMode::PositionsOnly, &p);
        for r in 0..s.selector.nrows() {
            let row = s.selector.row(r);
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(row.iter().filter(|&&v| v == 0.0).count(), 3);
        }
    }
}
