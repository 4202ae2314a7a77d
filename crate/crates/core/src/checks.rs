//! Self-checks run by the `check` subcommand: the identified model against
//! the analytic ARMA oracle, the Riccati pass against a fixed-point DARE
//! solve, and the optimality residual against finite differences.

use crate::error::Result;
use crate::info_state::{InfoLayout, LtvInfoStep};
use crate::linalg::{diag, Mat, Vector};
use crate::optimizer::{backward_pass, evaluate_cost, CostSpec};
use crate::plants::{
    linearize_fd, ControlPolicy, LinearTimeVarying, NoiseSpec, ObservationMode, Pendulum,
    PlantModel, RolloutId, Sensor, Simulator, SyntheticLtv,
};
use crate::sysid::{arma_from_ltv, collect_rollouts, fit_arma, PerturbationPlan};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub max_error: f64,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.max_error < self.tolerance
    }
}

/// Noiseless fit on a random positions-only LTV system against the exact
/// ARMA coefficients, for `t >= q`.
pub fn arma_oracle(seed: u64) -> Result<CheckReport> {
    let (n_x, positions, q, horizon) = (4, 2, 2, 30);
    let ltv = SyntheticLtv::random(n_x, 1, positions, horizon, true, seed);
    let plant = PlantModel::SyntheticLtv(ltv.clone());
    let sensor = Sensor::new(ObservationMode::PositionsOnly, &plant);
    let truth = LinearTimeVarying {
        a: (0..horizon).map(|t| ltv.a_at(t).clone()).collect(),
        b: (0..horizon).map(|t| ltv.b_at(t).clone()).collect(),
        c: vec![sensor.selector.clone(); horizon + 1],
    };
    let sim = Simulator::new(plant, sensor);
    let controls = vec![Vector::zeros(1); horizon];
    let nominal = sim.rollout(
        &ltv.initial_state,
        &ControlPolicy::OpenLoop { controls },
        &NoiseSpec::noiseless(seed),
        horizon,
        RolloutId::probe(0),
    )?;
    let plan = PerturbationPlan {
        perturbation_std: 0.1,
        rollouts: 24,
        averaging: 1,
        excitation_std: 0.1,
        seed,
    };
    let data = collect_rollouts(
        &sim,
        &nominal,
        None,
        &plan,
        &NoiseSpec::noiseless(seed),
        q,
        1,
    )?;
    let model = fit_arma(&data, None)?;
    let mut max_error: f64 = 0.0;
    for t in q..=horizon - 1 {
        let exact = arma_from_ltv(&truth, q, t)?.coefficient_matrix();
        let fitted = model
            .step_at(t)
            .expect("fit covers every step")
            .coefficient_matrix();
        max_error = max_error.max((exact - fitted).abs().max());
    }
    Ok(CheckReport {
        name: "arma_oracle",
        max_error,
        tolerance: 1e-6,
    })
}

/// Fixed-point iteration of the discrete algebraic Riccati equation.
pub fn dare_fixed_point(a: &Mat, b: &Mat, q: &Mat, r: &Mat, iterations: usize) -> Mat {
    let mut p = q.clone();
    for _ in 0..iterations {
        let bt_p = b.transpose() * &p;
        let gain = (r + &bt_p * b).try_inverse().expect("R + B'PB invertible") * (&bt_p * a);
        p = q + a.transpose() * &p * a - a.transpose() * &p * b * gain;
        p = (&p + p.transpose()) * 0.5;
    }
    p
}

/// Long-horizon backward pass on a stable LTI system against the DARE fixed point.
pub fn riccati_vs_dare() -> Result<CheckReport> {
    let a = Mat::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
    let b = Mat::from_row_slice(2, 1, &[0.005, 0.1]);
    let q = diag(&[1.0, 0.5]);
    let r = Mat::from_element(1, 1, 0.2);
    let horizon = 600;
    let layout = InfoLayout::new(2, 1, 1);
    let steps = vec![
        LtvInfoStep {
            a: a.clone(),
            b: b.clone()
        };
        horizon
    ];
    let cost = CostSpec {
        q: q.clone(),
        r: r.clone(),
        q_terminal: q.clone(),
        target: Vector::zeros(2),
    };
    let z = vec![Vector::zeros(2); horizon + 1];
    let u = vec![Vector::zeros(1); horizon];
    let bp = backward_pass(&steps, &z, &u, &cost, layout)?;
    let p = dare_fixed_point(&a, &b, &q, &r, 5000);
    let rel = (&bp.value_hessians[0] - &p).abs().max() / p.abs().max();
    Ok(CheckReport {
        name: "riccati_vs_dare",
        max_error: rel,
        tolerance: 1e-6,
    })
}

/// Optimality residual on the fully observed pendulum against central
/// differences of the total cost, at `samples` evenly spaced steps.
pub fn gradient_check(samples: usize) -> Result<CheckReport> {
    let plant = PlantModel::Pendulum(Pendulum::default());
    let sensor = Sensor::new(ObservationMode::FullState, &plant);
    let sim = Simulator::new(plant.clone(), sensor);
    let horizon = 100;
    let controls: Vec<Vector> = (0..horizon)
        .map(|t| Vector::from_element(1, 1.5 * (0.05 * t as f64).sin()))
        .collect();
    let cost = CostSpec {
        q: diag(&[1.0, 0.1]),
        r: Mat::from_element(1, 1, 0.01),
        q_terminal: diag(&[10.0, 1.0]),
        target: Vector::zeros(2),
    };
    let x0 = plant.initial_state();
    let simulate = |u: &[Vector]| -> Result<f64> {
        let tr = sim.rollout(
            &x0,
            &ControlPolicy::OpenLoop {
                controls: u.to_vec(),
            },
            &NoiseSpec::noiseless(0),
            horizon,
            RolloutId::probe(0),
        )?;
        evaluate_cost(&tr.measurements, &tr.controls, &cost)
    };
    let nominal = sim.rollout(
        &x0,
        &ControlPolicy::OpenLoop {
            controls: controls.clone(),
        },
        &NoiseSpec::noiseless(0),
        horizon,
        RolloutId::probe(0),
    )?;
    let steps: Vec<LtvInfoStep> = linearize_fd(&plant, &nominal)?
        .into_iter()
        .map(|(a, b)| LtvInfoStep { a, b })
        .collect();
    let bp = backward_pass(
        &steps,
        &nominal.measurements,
        &nominal.controls,
        &cost,
        InfoLayout::new(2, 1, 1),
    )?;
    let h = 1e-5;
    let mut max_error: f64 = 0.0;
    for i in 0..samples {
        let t = i * (horizon - 1) / samples.saturating_sub(1).max(1);
        let mut plus = controls.clone();
        let mut minus = controls.clone();
        plus[t][0] += h;
        minus[t][0] -= h;
        let half_gradient = (simulate(&plus)? - simulate(&minus)?) / (4.0 * h);
        let residual = bp.residuals[t][0];
        let rel = (residual - half_gradient).abs() / half_gradient.abs().max(1e-8);
        max_error = max_error.max(rel);
    }
    Ok(CheckReport {
        name: "gradient_check",
        max_error,
        tolerance: 1e-4,
    })
}

pub fn run_all(seed: u64) -> Result<Vec<CheckReport>> {
    Ok(vec![
        arma_oracle(seed)?,
        riccati_vs_dare()?,
        gradient_check(10)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for report in run_all(3).unwrap() {
            assert!(report.passed(), "{report:?}");
        }
    }
}
