//! Seeded, independently keyed Gaussian noise streams.
//!
//! Every rollout draws from streams keyed by `(seed, RolloutId, Stream)`, so a
//! rollout's noise never depends on which other rollouts ran before it or on
//! which thread ran it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Standard deviations of the injected disturbances plus the seed of their streams.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    /// Per-component std of the additive process noise, per step.
    pub process_std: f64,
    /// Per-component std of the additive measurement noise.
    pub measurement_std: f64,
    /// Per-component std of the initial-state deviation.
    pub initial_deviation_std: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless(seed: u64) -> Self {
        NoiseSpec {
            process_std: 0.0,
            measurement_std: 0.0,
            initial_deviation_std: 0.0,
            seed,
        }
    }

    /// Disturbances at `ratio` times the initial-deviation std. Measurement
    /// noise is only switched on when `measured_noise` is set.
    pub fn proportional(
        initial_deviation_std: f64,
        ratio: f64,
        measured_noise: bool,
        seed: u64,
    ) -> Self {
        NoiseSpec {
            process_std: ratio * initial_deviation_std,
            measurement_std: if measured_noise {
                ratio * initial_deviation_std
            } else {
                0.0
            },
            initial_deviation_std,
            seed,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.process_std == 0.0 && self.measurement_std == 0.0 && self.initial_deviation_std == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("process_std", self.process_std),
            ("measurement_std", self.measurement_std),
            ("initial_deviation_std", self.initial_deviation_std),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(
                    name,
                    format!("must be finite and non-negative, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// What a rollout is for; part of its stream key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    Forward = 1,
    Identification = 2,
    Probe = 3,
}

/// Identity of one rollout inside a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RolloutId {
    pub purpose: Purpose,
    pub iteration: u64,
    pub group: u64,
    pub member: u64,
}

impl RolloutId {
    pub fn new(purpose: Purpose, iteration: usize, group: usize, member: usize) -> Self {
        RolloutId {
            purpose,
            iteration: iteration as u64,
            group: group as u64,
            member: member as u64,
        }
    }

    pub fn probe(index: usize) -> Self {
        Self::new(Purpose::Probe, 0, index, 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    InitialDeviation = 0,
    Process = 1,
    Measurement = 2,
    Perturbation = 3,
    Excitation = 4,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a label.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ label)
}

pub fn stream_rng(seed: u64, id: &RolloutId, stream: Stream) -> ChaCha8Rng {
    let mut h = splitmix64(seed);
    for part in [id.purpose as u64, id.iteration, id.group, id.member] {
        h = splitmix64(h ^ part);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(h);
    rng.set_stream(stream as u64);
    rng
}

/// Zero-mean isotropic Gaussian vectors from one stream. A zero std never
/// touches the generator.
pub struct GaussianStream {
    rng: ChaCha8Rng,
    std: f64,
}

impl GaussianStream {
    pub fn new(seed: u64, id: &RolloutId, stream: Stream, std: f64) -> Self {
        GaussianStream {
            rng: stream_rng(seed, id, stream),
            std,
        }
    }

    pub fn sample(&mut self, dim: usize) -> Vector {
        if self.std == 0.0 {
            return Vector::zeros(dim);
        }
        let std = self.std;
        Vector::from_fn(dim, |_, _| {
            let n: f64 = StandardNormal.sample(&mut self.rng);
            std * n
        })
    }
}
