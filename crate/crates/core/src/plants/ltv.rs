use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{Mat, Vector};

/// Linear time-varying plant `x_{t+1} = A_t x_t + B_t u_t`. The first
/// `positions` state components are the ones a positions-only sensor sees.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticLtv {
    pub a: Vec<Mat>,
    pub b: Vec<Mat>,
    pub positions: usize,
    pub initial_state: Vector,
}

impl SyntheticLtv {
    pub fn time_invariant(a: Mat, b: Mat, positions: usize, initial_state: Vector) -> Self {
        SyntheticLtv {
            a: vec![a],
            b: vec![b],
            positions,
            initial_state,
        }
    }

    /// Random system with moderate gain: `A_t = 0.95 I + 0.3 G_t / sqrt(n)`
    /// drifting slowly over the horizon when `time_varying`.
    pub fn random(
        state_dim: usize,
        control_dim: usize,
        positions: usize,
        horizon: usize,
        time_varying: bool,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gaussian = |r: usize, c: usize| -> Mat {
            Mat::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng))
        };
        let scale = 0.3 / (state_dim as f64).sqrt();
        let a0 =
            Mat::identity(state_dim, state_dim) * 0.95 + gaussian(state_dim, state_dim) * scale;
        let a1 = gaussian(state_dim, state_dim) * (0.1 * scale);
        let b0 = gaussian(state_dim, control_dim);
        let b1 = gaussian(state_dim, control_dim) * 0.1;
        let steps = if time_varying { horizon.max(1) } else { 1 };
        let mut a = Vec::with_capacity(steps);
        let mut b = Vec::with_capacity(steps);
        for t in 0..steps {
            let phase = (t as f64 * 0.3).sin();
            a.push(&a0 + &a1 * phase);
            b.push(&b0 + &b1 * phase);
        }
        let initial_state = Vector::from_element(state_dim, 1.0);
        SyntheticLtv {
            a,
            b,
            positions,
            initial_state,
        }
    }

    pub fn a_at(&self, t: usize) -> &Mat {
        &self.a[t.min(self.a.len() - 1)]
    }

    pub fn b_at(&self, t: usize) -> &Mat {
        &self.b[t.min(self.b.len() - 1)]
    }

    pub fn drift(&self, t: usize, x: &Vector, u: &Vector) -> Vector {
        self.a_at(t) * x + self.b_at(t) * u
    }
}
