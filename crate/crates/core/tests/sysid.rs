use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use podilqr::plants::{
    ControlPolicy, LinearTimeVarying, NoiseSpec, ObservationMode, PlantModel, RolloutId, Sensor,
    Simulator, SyntheticLtv, Trajectory,
};
use podilqr::sysid::{
    arma_from_ltv, bias_report, collect_rollouts, debias_full_state, fit_arma, PerturbationPlan,
};
use podilqr::Error;

type Mat = DMatrix<f64>;
type Vector = DVector<f64>;

struct Setup {
    ltv: SyntheticLtv,
    sim: Simulator,
    truth: LinearTimeVarying,
    nominal: Trajectory,
}

fn setup(n_x: usize, positions: usize, mode: ObservationMode, horizon: usize, seed: u64) -> Setup {
    let ltv = SyntheticLtv::random(n_x, 1, positions, horizon, true, seed);
    let plant = PlantModel::SyntheticLtv(ltv.clone());
    let sensor = Sensor::new(mode, &plant);
    let truth = LinearTimeVarying {
        a: (0..horizon).map(|t| ltv.a_at(t).clone()).collect(),
        b: (0..horizon).map(|t| ltv.b_at(t).clone()).collect(),
        c: vec![sensor.selector.clone(); horizon + 1],
    };
    let sim = Simulator::new(plant, sensor);
    let nominal = sim
        .rollout(
            &ltv.initial_state,
            &ControlPolicy::OpenLoop {
                controls: vec![Vector::zeros(1); horizon],
            },
            &NoiseSpec::noiseless(0),
            horizon,
            RolloutId::probe(0),
        )
        .unwrap();
    Setup {
        ltv,
        sim,
        truth,
        nominal,
    }
}

fn plan(rollouts: usize, seed: u64) -> PerturbationPlan {
    PerturbationPlan {
        perturbation_std: 0.1,
        rollouts,
        averaging: 1,
        excitation_std: 1e-3,
        seed,
    }
}

#[test]
fn noiseless_positions_only_fit_matches_analytic_coefficients() {
    let s = setup(4, 2, ObservationMode::PositionsOnly, 30, 8);
    let mut p = plan(24, 8);
    p.excitation_std = 0.1;
    let data =
        collect_rollouts(&s.sim, &s.nominal, None, &p, &NoiseSpec::noiseless(8), 2, 1).unwrap();
    let model = fit_arma(&data, None).unwrap();
    let exact: Vec<_> = (2..30)
        .map(|t| arma_from_ltv(&s.truth, 2, t).unwrap())
        .collect();
    let report = bias_report(&model, &exact).unwrap();
    assert!(report.max < 1e-6, "{report:?}");
}

#[test]
fn overlong_window_is_reported_rank_deficient() {
    // n_x = 3 seen through 2 sensors over 2 steps: 6 regressors, 5 degrees of freedom.
    let s = setup(3, 2, ObservationMode::PositionsOnly, 10, 5);
    let mut p = plan(40, 5);
    p.excitation_std = 0.1;
    let data =
        collect_rollouts(&s.sim, &s.nominal, None, &p, &NoiseSpec::noiseless(5), 2, 1).unwrap();
    assert!(matches!(
        fit_arma(&data, None),
        Err(Error::RankDeficient { t: 2, .. })
    ));
}

#[test]
fn fully_observed_feedback_fit_is_consistent() {
    let horizon = 15;
    let mut shrinking = 0;
    for seed in 0..4 {
        let s = setup(3, 3, ObservationMode::FullState, horizon, seed);
        let gains: Vec<Mat> = (0..horizon)
            .map(|t| -0.3 * s.ltv.b_at(t).transpose())
            .collect();
        let noise = NoiseSpec::proportional(0.1, 0.1, false, seed);
        let errors: Vec<f64> = [64, 256, 1024]
            .iter()
            .map(|&n| {
                let data = collect_rollouts(
                    &s.sim,
                    &s.nominal,
                    Some(&gains),
                    &plan(n, seed),
                    &noise,
                    1,
                    1,
                )
                .unwrap();
                let model = fit_arma(&data, Some(&gains)).unwrap();
                (1..horizon)
                    .map(|t| {
                        let step = model.step_at(t).unwrap();
                        (&step.alphas[0] - s.ltv.a_at(t - 1)).norm()
                            + (&step.betas[0] - s.ltv.b_at(t - 1)).norm()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        if errors[2] < errors[1] && errors[1] < errors[0] {
            shrinking += 1;
        }
    }
    assert!(
        shrinking >= 3,
        "error shrank with n_s in only {shrinking}/4 seeds"
    );
}

#[test]
fn partially_observed_noisy_fit_stays_biased() {
    let horizon = 15;
    for seed in 0..3 {
        let s = setup(4, 2, ObservationMode::PositionsOnly, horizon, seed);
        let exact: Vec<_> = (2..horizon)
            .map(|t| arma_from_ltv(&s.truth, 2, t).unwrap())
            .collect();
        let noise = NoiseSpec::proportional(0.1, 0.1, true, seed);
        let bias = |n: usize| {
            let data =
                collect_rollouts(&s.sim, &s.nominal, None, &plan(n, seed), &noise, 2, 1).unwrap();
            bias_report(&fit_arma(&data, None).unwrap(), &exact)
                .unwrap()
                .median
        };
        let (small, large) = (bias(256), bias(2048));
        assert!(
            large > 0.5 * small,
            "seed {seed}: bias fell from {small} to {large}"
        );
        assert!(large > 1e-3, "seed {seed}: bias {large}");
    }
}

#[test]
fn feedback_keeps_noisy_rollouts_closer_to_nominal() {
    let horizon = 40;
    // Marginally unstable plant so open-loop deviations grow.
    let a = Mat::from_row_slice(2, 2, &[1.05, 0.1, 0.0, 1.02]);
    let b = Mat::from_row_slice(2, 1, &[0.0, 1.0]);
    let ltv = SyntheticLtv::time_invariant(a, b, 2, Vector::from_vec(vec![1.0, 0.0]));
    let plant = PlantModel::SyntheticLtv(ltv.clone());
    let sim = Simulator::new(
        plant.clone(),
        Sensor::new(ObservationMode::FullState, &plant),
    );
    let nominal = sim
        .rollout(
            &ltv.initial_state,
            &ControlPolicy::OpenLoop {
                controls: vec![Vector::zeros(1); horizon],
            },
            &NoiseSpec::noiseless(0),
            horizon,
            RolloutId::probe(0),
        )
        .unwrap();
    let stabilizing = vec![Mat::from_row_slice(1, 2, &[-0.5, -1.0]); horizon];
    let zero = vec![Mat::zeros(1, 2); horizon];
    let max_dev = |gains: &[Mat], seed: u64| {
        let noise = NoiseSpec::proportional(0.1, 0.5, false, seed);
        let data =
            collect_rollouts(&sim, &nominal, Some(gains), &plan(16, seed), &noise, 1, 1).unwrap();
        data.steps
            .iter()
            .map(|s| s.responses.abs().max())
            .fold(0.0, f64::max)
    };
    for seed in 0..5 {
        let closed = max_dev(&stabilizing, seed);
        let open = max_dev(&zero, seed);
        assert!(closed < open, "seed {seed}: {closed} vs {open}");
    }
}

fn square(n: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| Mat::from_vec(n, n, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn debias_inverts_closed_loop(
        (a, b, k) in (1usize..5, 1usize..3).prop_flat_map(|(n, m)| (
            square(n),
            prop::collection::vec(-2.0f64..2.0, n * m).prop_map(move |v| Mat::from_vec(n, m, v)),
            prop::collection::vec(-2.0f64..2.0, n * m).prop_map(move |v| Mat::from_vec(m, n, v)),
        )),
    ) {
        let closed = &a + &b * &k;
        let (a_back, b_back) = debias_full_state(&closed, &b, &k).unwrap();
        prop_assert!((a_back - &a).abs().max() < 1e-12);
        prop_assert_eq!(b_back, b);
    }

    #[test]
    fn zero_gain_debias_is_identity(a in square(3)) {
        let b = Mat::from_element(3, 1, 0.7);
        let (a_back, _) = debias_full_state(&a, &b, &Mat::zeros(1, 3)).unwrap();
        prop_assert_eq!(a_back, a);
    }
}
