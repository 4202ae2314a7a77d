use std::sync::atomic::{AtomicU64, Ordering};

use super::noise::{GaussianStream, NoiseSpec, RolloutId, Stream};
use super::{ControlPolicy, PlantModel, PlantState, Sensor, Trajectory, DIVERGENCE_BOUND};
use crate::error::{check_dim, Error, Result};
use crate::linalg::Vector;

/// Simulates one episode. Noise comes from streams keyed by `(noise.seed, id)`;
/// with every std at zero the result is deterministic.
pub fn rollout(
    plant: &PlantModel,
    sensor: &Sensor,
    initial_state: &PlantState,
    policy: &ControlPolicy,
    noise: &NoiseSpec,
    horizon: usize,
    id: RolloutId,
) -> Result<Trajectory> {
    let (n_x, n_u, n_z) = (
        plant.state_dim(),
        plant.control_dim(),
        sensor.measurement_dim(),
    );
    check_dim("initial state", n_x, initial_state.len())?;
    noise.validate()?;
    policy.validate(horizon, n_u)?;

    let mut init = GaussianStream::new(
        noise.seed,
        &id,
        Stream::InitialDeviation,
        noise.initial_deviation_std,
    );
    let mut process = GaussianStream::new(noise.seed, &id, Stream::Process, noise.process_std);
    let mut meas = GaussianStream::new(noise.seed, &id, Stream::Measurement, noise.measurement_std);

    let mut states = Vec::with_capacity(horizon + 1);
    let mut controls: Vec<Vector> = Vec::with_capacity(horizon);
    let mut measurements = Vec::with_capacity(horizon + 1);

    let mut x = initial_state + init.sample(n_x);
    for t in 0..horizon {
        measurements.push(sensor.observe(&x, &meas.sample(n_z))?);
        let u = policy.control(t, &measurements, &controls);
        if !u.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { step: t });
        }
        let next = plant.step(t, &x, &u, &process.sample(n_x))?;
        if !next
            .iter()
            .all(|v| v.is_finite() && v.abs() <= DIVERGENCE_BOUND)
        {
            return Err(Error::Divergence { step: t + 1 });
        }
        states.push(x);
        controls.push(u);
        x = next;
    }
    measurements.push(sensor.observe(&x, &meas.sample(n_z))?);
    states.push(x);
    Ok(Trajectory {
        states,
        controls,
        measurements,
    })
}

/// Element-wise mean of equally long trajectories.
pub fn average_trajectories(trajectories: &[Trajectory]) -> Trajectory {
    assert!(!trajectories.is_empty(), "cannot average zero trajectories");
    if trajectories.len() == 1 {
        return trajectories[0].clone();
    }
    let n = trajectories.len() as f64;
    let mean = |get: &dyn Fn(&Trajectory) -> &Vec<Vector>| -> Vec<Vector> {
        let first = get(&trajectories[0]);
        (0..first.len())
            .map(|i| {
                let mut acc = first[i].clone();
                for tr in &trajectories[1..] {
                    acc += &get(tr)[i];
                }
                acc / n
            })
            .collect()
    };
    Trajectory {
        states: mean(&|t| &t.states),
        controls: mean(&|t| &t.controls),
        measurements: mean(&|t| &t.measurements),
    }
}

/// A plant and sensor pair that counts every rollout it runs.
#[derive(Debug)]
pub struct Simulator {
    pub plant: PlantModel,
    pub sensor: Sensor,
    rollouts: AtomicU64,
}

impl Simulator {
    pub fn new(plant: PlantModel, sensor: Sensor) -> Self {
        Simulator {
            plant,
            sensor,
            rollouts: AtomicU64::new(0),
        }
    }

    pub fn rollout(
        &self,
        initial_state: &PlantState,
        policy: &ControlPolicy,
        noise: &NoiseSpec,
        horizon: usize,
        id: RolloutId,
    ) -> Result<Trajectory> {
        self.rollouts.fetch_add(1, Ordering::Relaxed);
        rollout(
            &self.plant,
            &self.sensor,
            initial_state,
            policy,
            noise,
            horizon,
            id,
        )
    }

    /// Number of rollouts run so far.
    pub fn rollout_count(&self) -> u64 {
        self.rollouts.load(Ordering::Relaxed)
    }

    pub fn state_dim(&self) -> usize {
        self.plant.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.plant.control_dim()
    }

    pub fn measurement_dim(&self) -> usize {
        self.sensor.measurement_dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plants::{ObservationMode, Pendulum};
    use std::f64::consts::PI;

    fn pendulum_sim() -> Simulator {
        let p = PlantModel::Pendulum(Pendulum::default());
        let s = Sensor::new(ObservationMode::FullState, &p);
        Simulator::new(p, s)
    }

    fn zeros(t: usize) -> ControlPolicy {
        ControlPolicy::OpenLoop {
            controls: vec![Vector::zeros(1); t],
        }
    }

    #[test]
    fn hanging_pendulum_stays_put() {
        let sim = pendulum_sim();
        let tr = sim
            .rollout(
                &Pendulum::hanging(),
                &zeros(50),
                &NoiseSpec::noiseless(0),
                50,
                RolloutId::probe(0),
            )
            .unwrap();
        assert_eq!(tr.states.len(), 51);
        assert_eq!(tr.measurements.len(), 51);
        for x in &tr.states {
            assert!((x[0] - PI).abs() < 1e-12 && x[1].abs() < 1e-12);
        }
        assert_eq!(sim.rollout_count(), 1);
    }

    #[test]
    fn seeded_rollouts_repeat_and_seeds_differ() {
        let sim = pendulum_sim();
        let noise = NoiseSpec {
            process_std: 1e-3,
            measurement_std: 1e-3,
            initial_deviation_std: 1e-2,
            seed: 11,
        };
        let run = |n: &NoiseSpec| {
            sim.rollout(&Pendulum::hanging(), &zeros(40), n, 40, RolloutId::probe(3))
                .unwrap()
        };
        assert_eq!(run(&noise), run(&noise));
        let other = NoiseSpec { seed: 12, ..noise };
        let (a, b) = (run(&noise), run(&other));
        assert!(a.states.iter().zip(&b.states).any(|(x, y)| x != y));
    }

    #[test]
    fn blow_up_reports_the_step() {
        let sim = pendulum_sim();
        let policy = ControlPolicy::OpenLoop {
            controls: vec![Vector::from_element(1, 1e9); 10],
        };
        let err = sim
            .rollout(
                &Pendulum::hanging(),
                &policy,
                &NoiseSpec::noiseless(0),
                10,
                RolloutId::probe(0),
            )
            .unwrap_err();
        assert!(matches!(err, Error::Divergence { step } if step >= 1));
    }

    #[test]
    fn short_policy_is_rejected() {
        let sim = pendulum_sim();
        let err = sim.rollout(
            &Pendulum::hanging(),
            &zeros(5),
            &NoiseSpec::noiseless(0),
            10,
            RolloutId::probe(0),
        );
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }
}
