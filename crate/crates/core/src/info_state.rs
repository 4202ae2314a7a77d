//! Information states and their structured linear dynamics.
//!
//! With depth `q`, the information-state deviation at time `t` is
//!
//! ```text
//! dZ_t = [dz_t, dz_{t-1}, ..., dz_{t-q+1}, du_{t-1}, ..., du_{t-q+1}]
//! ```
//!
//! (newest first in both blocks), and an order-`q` ARMA model of the
//! measurements induces `dZ_{t+1} = A_t dZ_t + B_t du_t` where the top block
//! row of `A_t` holds the ARMA coefficients and every other row is a shift
//! register.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{numerical_rank, Mat, Vector};
use crate::plants::LinearTimeVarying;

/// Singular values below this fraction of the largest count as zero.
pub const OBSERVABILITY_RANK_TOL: f64 = 1e-8;

/// Block sizes of an information state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InfoLayout {
    pub n_z: usize,
    pub n_u: usize,
    pub q: usize,
}

impl InfoLayout {
    pub fn new(n_z: usize, n_u: usize, q: usize) -> Self {
        assert!(q >= 1, "information-state depth must be at least 1");
        InfoLayout { n_z, n_u, q }
    }

    pub fn dim(&self) -> usize {
        self.q * self.n_z + (self.q - 1) * self.n_u
    }

    /// Row offset of measurement block `i` (`i = 0` is the newest).
    pub fn z_offset(&self, i: usize) -> usize {
        i * self.n_z
    }

    /// Row offset of control block `j` (`j = 0` is `du_{t-1}`).
    pub fn u_offset(&self, j: usize) -> usize {
        self.q * self.n_z + j * self.n_u
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InformationState {
    /// `[z_t, z_{t-1}, ..., z_{t-q+1}]`
    pub z_block: Vec<Vector>,
    /// `[u_{t-1}, ..., u_{t-q+1}]`
    pub u_block: Vec<Vector>,
    pub q: usize,
}

impl InformationState {
    pub fn to_vector(&self) -> Vector {
        let blocks: Vec<&Vector> = self.z_block.iter().chain(self.u_block.iter()).collect();
        crate::linalg::stack(&blocks)
    }

    pub fn from_vector(v: &Vector, layout: InfoLayout) -> Result<Self> {
        check_dim("information state", layout.dim(), v.len())?;
        let z_block = (0..layout.q)
            .map(|i| v.rows(layout.z_offset(i), layout.n_z).into_owned())
            .collect();
        let u_block = (0..layout.q - 1)
            .map(|j| v.rows(layout.u_offset(j), layout.n_u).into_owned())
            .collect();
        Ok(InformationState {
            z_block,
            u_block,
            q: layout.q,
        })
    }
}

/// How missing pre-history is filled when fewer than `q` measurements exist.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    Disabled,
    /// Repeat the earliest measurement and use zero controls.
    RepeatInitial,
    /// Zeros for both; the right choice for deviation histories.
    Zero,
}

/// Stacks chronological histories (oldest first, the last measurement is
/// `z_t` and the last control is `u_{t-1}`) into an information state.
pub fn build_info_state(
    measurements: &[Vector],
    controls: &[Vector],
    q: usize,
    padding: Padding,
) -> Result<InformationState> {
    if q == 0 {
        return Err(Error::InvalidArgument(
            "information-state depth q must be >= 1".into(),
        ));
    }
    let Some(first) = measurements.first() else {
        return Err(Error::InsufficientHistory {
            needed: q,
            available: 0,
        });
    };
    let n_z = first.len();
    if padding == Padding::Disabled && (measurements.len() < q || controls.len() + 1 < q) {
        return Err(Error::InsufficientHistory {
            needed: q,
            available: measurements.len().min(controls.len() + 1),
        });
    }
    let n_u = match controls.first() {
        Some(u) => u.len(),
        None if q == 1 => 0,
        None => {
            return Err(Error::InvalidArgument(
                "control dimension unknown: empty control history with q > 1".into(),
            ))
        }
    };

    let z_block = (0..q)
        .map(|i| match measurements.len().checked_sub(i + 1) {
            Some(idx) => measurements[idx].clone(),
            None if padding == Padding::RepeatInitial => first.clone(),
            None => Vector::zeros(n_z),
        })
        .collect();
    let u_block = (0..q - 1)
        .map(|j| match controls.len().checked_sub(j + 1) {
            Some(idx) => controls[idx].clone(),
            None => Vector::zeros(n_u),
        })
        .collect();
    Ok(InformationState {
        z_block,
        u_block,
        q,
    })
}

/// Information-state deviation at time `t` from deviation histories indexed by
/// absolute time (`z_dev[s]` for `s <= t`, `u_dev[s]` for `s < t`). Entries
/// before time zero are zero.
pub fn deviation_vector(
    z_dev: &[Vector],
    u_dev: &[Vector],
    t: usize,
    layout: InfoLayout,
) -> Vector {
    let mut out = Vector::zeros(layout.dim());
    for i in 0..layout.q {
        if let Some(s) = t.checked_sub(i) {
            out.rows_mut(layout.z_offset(i), layout.n_z)
                .copy_from(&z_dev[s]);
        }
    }
    for j in 0..layout.q - 1 {
        if let Some(s) = t.checked_sub(j + 1) {
            out.rows_mut(layout.u_offset(j), layout.n_u)
                .copy_from(&u_dev[s]);
        }
    }
    out
}

/// ARMA coefficients predicting `dz_t`:
/// `dz_t = sum_i alphas[i] dz_{t-1-i} + sum_i betas[i] du_{t-1-i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmaStep {
    pub t: usize,
    /// `[alpha_{t-1}, ..., alpha_{t-q}]`, each `n_z x n_z`.
    pub alphas: Vec<Mat>,
    /// `[beta_{t-1}, ..., beta_{t-q}]`, each `n_z x n_u`.
    pub betas: Vec<Mat>,
}

impl ArmaStep {
    pub fn q(&self) -> usize {
        self.alphas.len()
    }

    pub fn n_z(&self) -> usize {
        self.alphas[0].nrows()
    }

    pub fn n_u(&self) -> usize {
        self.betas[0].ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(Error::InvalidArgument(
                "ARMA step needs at least one lag".into(),
            ));
        }
        check_dim("ARMA beta blocks", self.alphas.len(), self.betas.len())?;
        let (n_z, n_u) = (self.n_z(), self.n_u());
        for a in &self.alphas {
            check_dim("ARMA alpha rows", n_z, a.nrows())?;
            check_dim("ARMA alpha cols", n_z, a.ncols())?;
        }
        for b in &self.betas {
            check_dim("ARMA beta rows", n_z, b.nrows())?;
            check_dim("ARMA beta cols", n_u, b.ncols())?;
        }
        if !self
            .alphas
            .iter()
            .chain(self.betas.iter())
            .all(crate::linalg::all_finite)
        {
            return Err(Error::NonFinite("ARMA coefficients"));
        }
        Ok(())
    }

    /// `[alpha_{t-1} .. alpha_{t-q} | beta_{t-1} .. beta_{t-q}]`.
    pub fn coefficient_matrix(&self) -> Mat {
        let (q, n_z, n_u) = (self.q(), self.n_z(), self.n_u());
        let mut m = Mat::zeros(n_z, q * (n_z + n_u));
        for i in 0..q {
            m.view_mut((0, i * n_z), (n_z, n_z))
                .copy_from(&self.alphas[i]);
            m.view_mut((0, q * n_z + i * n_u), (n_z, n_u))
                .copy_from(&self.betas[i]);
        }
        m
    }

    pub fn from_coefficient_matrix(t: usize, m: &Mat, n_z: usize, n_u: usize, q: usize) -> Self {
        let alphas = (0..q)
            .map(|i| m.view((0, i * n_z), (n_z, n_z)).into_owned())
            .collect();
        let betas = (0..q)
            .map(|i| m.view((0, q * n_z + i * n_u), (n_z, n_u)).into_owned())
            .collect();
        ArmaStep { t, alphas, betas }
    }

    /// One-step prediction from newest-first lag lists.
    pub fn predict(&self, z_lags: &[Vector], u_lags: &[Vector]) -> Vector {
        let mut out = Vector::zeros(self.n_z());
        for (a, z) in self.alphas.iter().zip(z_lags) {
            out += a * z;
        }
        for (b, u) in self.betas.iter().zip(u_lags) {
            out += b * u;
        }
        out
    }
}

/// Information-state transition `dZ_{t+1} = a dZ_t + b du_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct LtvInfoStep {
    pub a: Mat,
    pub b: Mat,
}

/// Places an ARMA step into the shift-register matrices. The step predicting
/// `dz_t` yields the transition out of time `t - 1`.
pub fn assemble_ltv(arma: &ArmaStep) -> Result<LtvInfoStep> {
    arma.validate()?;
    let layout = InfoLayout::new(arma.n_z(), arma.n_u(), arma.q());
    let (q, n_z, n_u) = (layout.q, layout.n_z, layout.n_u);
    let dim = layout.dim();
    let mut a = Mat::zeros(dim, dim);
    let mut b = Mat::zeros(dim, n_u);

    for i in 0..q {
        a.view_mut((0, layout.z_offset(i)), (n_z, n_z))
            .copy_from(&arma.alphas[i]);
    }
    for j in 1..q {
        a.view_mut((0, layout.u_offset(j - 1)), (n_z, n_u))
            .copy_from(&arma.betas[j]);
    }
    b.view_mut((0, 0), (n_z, n_u)).copy_from(&arma.betas[0]);

    for i in 1..q {
        a.view_mut((layout.z_offset(i), layout.z_offset(i - 1)), (n_z, n_z))
            .fill_with_identity();
    }
    if q > 1 {
        b.view_mut((layout.u_offset(0), 0), (n_u, n_u))
            .fill_with_identity();
        for j in 1..q - 1 {
            a.view_mut((layout.u_offset(j), layout.u_offset(j - 1)), (n_u, n_u))
                .fill_with_identity();
        }
    }
    Ok(LtvInfoStep { a, b })
}

/// Stacked map from `dx_{t-q}` to `[dz_{t-1}; ...; dz_{t-q}]`.
pub fn observability_matrix(truth: &LinearTimeVarying, q: usize, t: usize) -> Result<Mat> {
    if q == 0 || t < q {
        return Err(Error::InvalidArgument(format!(
            "observability matrix needs 1 <= q <= t, got q={q}, t={t}"
        )));
    }
    truth.check_range(t - q, t)?;
    let n_x = truth.state_dim();
    let rows: Vec<Mat> = (1..=q)
        .map(|i| &truth.c[t - i] * truth.transition(t - q, t - i))
        .collect();
    let total: usize = rows.iter().map(|r| r.nrows()).sum();
    let mut o = Mat::zeros(total, n_x);
    let mut offset = 0;
    for r in rows {
        o.view_mut((offset, 0), (r.nrows(), n_x)).copy_from(&r);
        offset += r.nrows();
    }
    Ok(o)
}

/// Numerical rank of the observability matrix and whether it has full column rank.
pub fn observability_rank(truth: &LinearTimeVarying, q: usize, t: usize) -> Result<(usize, bool)> {
    let o = observability_matrix(truth, q, t)?;
    let rank = numerical_rank(&o, OBSERVABILITY_RANK_TOL);
    Ok((rank, rank == o.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plants::{linearize_fd, ObservationMode, Pendulum, PlantModel, Sensor, Simulator};
    use crate::plants::{ControlPolicy, NoiseSpec, RolloutId};
    use proptest::prelude::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn m1(x: f64) -> Mat {
        Mat::from_element(1, 1, x)
    }

    #[test]
    fn depth_one_is_the_measurement() {
        let s = build_info_state(&[v(&[1.0, 2.0])], &[], 1, Padding::Disabled).unwrap();
        assert_eq!(s.to_vector(), v(&[1.0, 2.0]));
    }

    #[test]
    fn stacks_newest_first() {
        let s =
            build_info_state(&[v(&[0.1]), v(&[0.3])], &[v(&[0.5])], 2, Padding::Disabled).unwrap();
        assert_eq!(s.to_vector(), v(&[0.3, 0.1, 0.5]));
    }

    #[test]
    fn short_history_is_an_error_without_padding() {
        let err = build_info_state(&[v(&[0.1])], &[], 2, Padding::Disabled);
        assert!(matches!(err, Err(Error::InsufficientHistory { .. })));
    }

    #[test]
    fn padding_fills_missing_pre_history() {
        let zs = [v(&[0.7]), v(&[0.9])];
        let us = [v(&[9.0])];
        let s = build_info_state(&zs, &us, 3, Padding::RepeatInitial).unwrap();
        assert_eq!(s.to_vector(), v(&[0.9, 0.7, 0.7, 9.0, 0.0]));
        let z = build_info_state(&zs, &us, 3, Padding::Zero).unwrap();
        assert_eq!(z.to_vector(), v(&[0.9, 0.7, 0.0, 9.0, 0.0]));
    }

    #[test]
    fn depth_one_assembly_is_the_arma_model() {
        let arma = ArmaStep {
            t: 1,
            alphas: vec![Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0])],
            betas: vec![Mat::from_row_slice(2, 1, &[5.0, 6.0])],
        };
        let ltv = assemble_ltv(&arma).unwrap();
        assert_eq!(ltv.a, arma.alphas[0]);
        assert_eq!(ltv.b, arma.betas[0]);
    }

    #[test]
    fn scalar_depth_two_assembly() {
        let arma = ArmaStep {
            t: 2,
            alphas: vec![m1(0.9), m1(-0.1)],
            betas: vec![m1(0.2), m1(0.05)],
        };
        let ltv = assemble_ltv(&arma).unwrap();
        let a = Mat::from_row_slice(3, 3, &[0.9, -0.1, 0.05, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(ltv.a, a);
        assert_eq!(ltv.b, Mat::from_column_slice(3, 1, &[0.2, 0.0, 1.0]));
    }

    #[test]
    fn assembly_rejects_mismatched_blocks() {
        let arma = ArmaStep {
            t: 2,
            alphas: vec![m1(0.9), m1(-0.1)],
            betas: vec![m1(0.2)],
        };
        assert!(assemble_ltv(&arma).is_err());
    }

    fn random_arma(seed: u64, n_z: usize, n_u: usize, q: usize) -> ArmaStep {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut r = |rows, cols| Mat::from_fn(rows, cols, |_, _| rng.random_range(-0.5..0.5));
        ArmaStep {
            t: q,
            alphas: (0..q).map(|_| r(n_z, n_z)).collect(),
            betas: (0..q).map(|_| r(n_z, n_u)).collect(),
        }
    }

    proptest! {
        #[test]
        fn assembly_structure_is_exact(seed in 0u64..1000, n_z in 1usize..3, n_u in 1usize..3, q in 1usize..5) {
            let arma = random_arma(seed, n_z, n_u, q);
            let ltv = assemble_ltv(&arma).unwrap();
            let layout = InfoLayout::new(n_z, n_u, q);
            let dim = layout.dim();
            prop_assert_eq!(ltv.a.shape(), (dim, dim));
            prop_assert_eq!(ltv.b.shape(), (dim, n_u));
            for r in n_z..dim {
                for c in 0..dim {
                    let expected = if r < q * n_z {
                        // measurement shift: row block i copies column block i-1
                        if c < q * n_z && c + n_z == r { 1.0 } else { 0.0 }
                    } else {
                        let ur = r - q * n_z;
                        if ur >= n_u && c >= q * n_z && c - q * n_z + n_u == ur { 1.0 } else { 0.0 }
                    };
                    prop_assert_eq!(ltv.a[(r, c)], expected);
                }
                let expected_b = |c: usize| if r >= q * n_z && r - q * n_z == c { 1.0 } else { 0.0 };
                for c in 0..n_u {
                    prop_assert_eq!(ltv.b[(r, c)], expected_b(c));
                }
            }
        }

        #[test]
        fn state_space_iteration_matches_arma_recursion(seed in 0u64..1000, n_z in 1usize..3, n_u in 1usize..3, q in 1usize..4) {
            use rand::{Rng, SeedableRng};
            let arma = random_arma(seed, n_z, n_u, q);
            let ltv = assemble_ltv(&arma).unwrap();
            let layout = InfoLayout::new(n_z, n_u, q);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed + 7);
            let us: Vec<Vector> = (0..20).map(|_| Vector::from_fn(n_u, |_, _| rng.random_range(-1.0..1.0))).collect();

            // direct recursion with zero pre-history
            let mut zs: Vec<Vector> = Vec::new();
            zs.push(Vector::zeros(n_z));
            for t in 1..=20 {
                let z_lags: Vec<Vector> = (1..=q).map(|i| if t >= i { zs[t - i].clone() } else { Vector::zeros(n_z) }).collect();
                let u_lags: Vec<Vector> = (1..=q).map(|i| if t >= i { us[t - i].clone() } else { Vector::zeros(n_u) }).collect();
                zs.push(arma.predict(&z_lags, &u_lags));
            }

            let mut state = Vector::zeros(layout.dim());
            for t in 0..20 {
                state = &ltv.a * &state + &ltv.b * &us[t];
                let dz = state.rows(0, n_z).into_owned();
                prop_assert!((dz - &zs[t + 1]).abs().max() < 1e-12);
            }
        }

        #[test]
        fn stacking_is_a_bijection(seed in 0u64..1000, n_z in 1usize..3, n_u in 1usize..3, q in 1usize..4) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let zs: Vec<Vector> = (0..q).map(|_| Vector::from_fn(n_z, |_, _| rng.random())).collect();
            let us: Vec<Vector> = (0..q.max(2) - 1).map(|_| Vector::from_fn(n_u, |_, _| rng.random())).collect();
            let us = &us[..q - 1];
            let s = build_info_state(&zs, us, q, Padding::Disabled).unwrap();
            let back = InformationState::from_vector(&s.to_vector(), InfoLayout::new(n_z, n_u, q)).unwrap();
            let mut z_rev = zs.clone();
            z_rev.reverse();
            let mut u_rev = us.to_vec();
            u_rev.reverse();
            prop_assert_eq!(back.z_block, z_rev);
            prop_assert_eq!(back.u_block, u_rev);
        }
    }

    #[test]
    fn deviation_vector_pads_with_zero() {
        let layout = InfoLayout::new(1, 1, 3);
        let z = vec![v(&[1.0]), v(&[2.0])];
        let u = vec![v(&[5.0])];
        assert_eq!(
            deviation_vector(&z, &u, 1, layout),
            v(&[2.0, 1.0, 0.0, 5.0, 0.0])
        );
    }

    fn constant_ltv(a: Mat, b: Mat, c: Mat, steps: usize) -> LinearTimeVarying {
        LinearTimeVarying {
            a: vec![a; steps],
            b: vec![b; steps],
            c: vec![c; steps + 1],
        }
    }

    #[test]
    fn full_observation_depth_one_has_full_rank() {
        let ltv = constant_ltv(
            Mat::identity(3, 3) * 0.5,
            Mat::zeros(3, 1),
            Mat::identity(3, 3),
            5,
        );
        assert_eq!(observability_rank(&ltv, 1, 3).unwrap(), (3, true));
    }

    #[test]
    fn zero_sensor_has_rank_zero() {
        let ltv = constant_ltv(Mat::identity(2, 2), Mat::zeros(2, 1), Mat::zeros(1, 2), 5);
        assert_eq!(observability_rank(&ltv, 2, 3).unwrap(), (0, false));
    }

    #[test]
    fn pendulum_positions_only_depth_two_is_observable() {
        let plant = PlantModel::Pendulum(Pendulum::default());
        let sensor = Sensor::new(ObservationMode::PositionsOnly, &plant);
        let sim = Simulator::new(plant.clone(), sensor.clone());
        let controls = (0..30).map(|t| v(&[(t as f64 * 0.2).sin()])).collect();
        let nominal = sim
            .rollout(
                &plant.initial_state(),
                &ControlPolicy::OpenLoop { controls },
                &NoiseSpec::noiseless(0),
                30,
                RolloutId::probe(0),
            )
            .unwrap();
        let lin = linearize_fd(&plant, &nominal).unwrap();
        let truth = LinearTimeVarying::from_linearization(lin, &sensor.selector);
        for t in 2..30 {
            let (rank, full) = observability_rank(&truth, 2, t).unwrap();
            assert!(full, "t={t} rank={rank}");
        }
        let (rank, full) = observability_rank(&truth, 1, 5).unwrap();
        assert_eq!((rank, full), (1, false));
    }
}
