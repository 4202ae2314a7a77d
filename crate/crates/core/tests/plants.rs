use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use podilqr::plants::{
    linearize_fd, Cartpole, ControlPolicy, NoiseSpec, ObservationMode, Pendulum, PlantModel,
    RolloutId, Sensor, Simulator, SyntheticLtv,
};

type Vector = DVector<f64>;

/// Cart-pole equations from the Lagrangian, solved as a 2x2 system in
/// `(x_ddot, theta_ddot)`. Uniform pole, `theta = 0` upright.
fn cartpole_rhs(p: &Cartpole, s: &[f64; 4], force: f64) -> [f64; 4] {
    let (m_c, m_p, l, g) = (p.cart_mass, p.pole_mass, p.pole_half_length, p.gravity);
    let (sin, cos) = s[1].sin_cos();
    let mass = DMatrix::from_row_slice(
        2,
        2,
        &[
            m_c + m_p,
            m_p * l * cos,
            m_p * l * cos,
            4.0 / 3.0 * m_p * l * l,
        ],
    );
    let rhs = DVector::from_vec(vec![force + m_p * l * s[3] * s[3] * sin, m_p * g * l * sin]);
    let acc = mass.lu().solve(&rhs).unwrap();
    [s[2], s[3], acc[0], acc[1]]
}

fn rk4(p: &Cartpole, s: [f64; 4], force: f64, dt: f64, substeps: usize) -> [f64; 4] {
    let h = dt / substeps as f64;
    let mut s = s;
    let add = |a: &[f64; 4], b: &[f64; 4], k: f64| -> [f64; 4] {
        std::array::from_fn(|i| a[i] + k * b[i])
    };
    for _ in 0..substeps {
        let k1 = cartpole_rhs(p, &s, force);
        let k2 = cartpole_rhs(p, &add(&s, &k1, h / 2.0), force);
        let k3 = cartpole_rhs(p, &add(&s, &k2, h / 2.0), force);
        let k4 = cartpole_rhs(p, &add(&s, &k3, h), force);
        s = std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    s
}

#[test]
fn cartpole_small_push_matches_rk4() {
    let cp = Cartpole::default();
    let plant = PlantModel::Cartpole(cp.clone());
    for du in [1e-3, -2e-3, 5e-4] {
        let start = Cartpole::hanging();
        let stepped = plant.drift(0, &start, &Vector::from_element(1, du));
        let reference = rk4(
            &cp,
            [start[0], start[1], start[2], start[3]],
            du,
            cp.dt,
            100,
        );
        for i in 0..4 {
            assert!(
                (stepped[i] - reference[i]).abs() < 1e-6,
                "component {i}: {} vs {}",
                stepped[i],
                reference[i]
            );
        }
    }
}

#[test]
fn cartpole_upright_and_hanging_are_equilibria() {
    let plant = PlantModel::Cartpole(Cartpole::default());
    let u = Vector::zeros(1);
    let upright = Vector::zeros(4);
    assert_eq!(plant.drift(0, &upright, &u), upright);
    let hanging = Cartpole::hanging();
    let next = plant.drift(0, &hanging, &u);
    assert!((next - hanging).abs().max() < 1e-15);
}

#[test]
fn positions_only_sensors() {
    let cart = PlantModel::Cartpole(Cartpole::default());
    let sensor = Sensor::new(ObservationMode::PositionsOnly, &cart);
    let x = Vector::from_vec(vec![0.3, -1.2, 4.0, 5.0]);
    assert_eq!(
        sensor.observe(&x, &Vector::zeros(2)).unwrap().as_slice(),
        &[0.3, -1.2]
    );

    let pend = PlantModel::Pendulum(Pendulum::default());
    let sensor = Sensor::new(ObservationMode::PositionsOnly, &pend);
    let x = Vector::from_vec(vec![0.7, -3.0]);
    assert_eq!(
        sensor.observe(&x, &Vector::zeros(1)).unwrap().as_slice(),
        &[0.7]
    );

    let sensor = Sensor::new(ObservationMode::FullState, &pend);
    assert_eq!(sensor.observe(&x, &Vector::zeros(2)).unwrap(), x);
}

#[test]
fn hanging_pendulum_open_loop_is_constant() {
    let plant = PlantModel::Pendulum(Pendulum::default());
    let sim = Simulator::new(
        plant.clone(),
        Sensor::new(ObservationMode::FullState, &plant),
    );
    let tr = sim
        .rollout(
            &plant.initial_state(),
            &ControlPolicy::OpenLoop {
                controls: vec![Vector::zeros(1); 50],
            },
            &NoiseSpec::noiseless(0),
            50,
            RolloutId::probe(0),
        )
        .unwrap();
    for x in &tr.states {
        assert!((x - &tr.states[0]).abs().max() < 1e-12);
    }
}

#[test]
fn linear_plant_linearizes_exactly() {
    let horizon = 12;
    let ltv = SyntheticLtv::random(3, 2, 3, horizon, true, 5);
    let plant = PlantModel::SyntheticLtv(ltv.clone());
    let sim = Simulator::new(
        plant.clone(),
        Sensor::new(ObservationMode::FullState, &plant),
    );
    let controls: Vec<Vector> = (0..horizon)
        .map(|t| Vector::from_vec(vec![0.1 * t as f64, -0.2]))
        .collect();
    let nominal = sim
        .rollout(
            &ltv.initial_state,
            &ControlPolicy::OpenLoop { controls },
            &NoiseSpec::noiseless(0),
            horizon,
            RolloutId::probe(0),
        )
        .unwrap();
    for (t, (a, b)) in linearize_fd(&plant, &nominal).unwrap().iter().enumerate() {
        assert!((a - ltv.a_at(t)).abs().max() < 1e-8);
        assert!((b - ltv.b_at(t)).abs().max() < 1e-8);
    }
}

fn noisy_rollout(seed: u64, member: usize, controls: &[f64]) -> podilqr::plants::Trajectory {
    let plant = PlantModel::Cartpole(Cartpole::default());
    let sim = Simulator::new(
        plant.clone(),
        Sensor::new(ObservationMode::PositionsOnly, &plant),
    );
    let noise = NoiseSpec::proportional(1e-2, 0.1, true, seed);
    let controls = controls
        .iter()
        .map(|&u| Vector::from_element(1, u))
        .collect::<Vec<_>>();
    let horizon = controls.len();
    sim.rollout(
        &plant.initial_state(),
        &ControlPolicy::OpenLoop { controls },
        &noise,
        horizon,
        RolloutId::probe(member),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn same_seed_same_trajectory(seed in any::<u64>(), controls in prop::collection::vec(-5.0f64..5.0, 1..40)) {
        let a = noisy_rollout(seed, 0, &controls);
        let b = noisy_rollout(seed, 0, &controls);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ(seed in 0u64..u64::MAX, controls in prop::collection::vec(-5.0f64..5.0, 2..40)) {
        let a = noisy_rollout(seed, 0, &controls);
        let b = noisy_rollout(seed + 1, 0, &controls);
        prop_assert!(a.states.iter().zip(&b.states).any(|(x, y)| x != y));
    }

    #[test]
    fn noiseless_measurement_is_selected_state(theta in -3.0f64..3.0, omega in -3.0f64..3.0, x in -2.0f64..2.0, v in -2.0f64..2.0) {
        let plant = PlantModel::Cartpole(Cartpole::default());
        let full = Sensor::new(ObservationMode::FullState, &plant);
        let part = Sensor::new(ObservationMode::PositionsOnly, &plant);
        let s = Vector::from_vec(vec![x, theta, v, omega]);
        prop_assert_eq!(full.observe(&s, &Vector::zeros(4)).unwrap(), s.clone());
        let z = part.observe(&s, &Vector::zeros(2)).unwrap();
        prop_assert_eq!(z.as_slice(), &[x, theta]);
    }
}
