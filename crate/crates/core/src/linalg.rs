//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Singular values in descending order.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &Mat, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&max) if max > 0.0 => s.iter().filter(|&&x| x > rel_tol * max).count(),
        _ => 0,
    }
}

/// Ratio of extreme singular values; infinite for a singular matrix.
pub fn condition_number(m: &Mat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&max), Some(&min)) if min > 0.0 => max / min,
        _ => f64::INFINITY,
    }
}

/// Moore-Penrose pseudoinverse with singular values below `rel_tol * sigma_max` dropped.
pub fn pinv(m: &Mat, rel_tol: f64) -> Mat {
    let svd = m.clone().svd(true, true);
    let max = svd.singular_values.max();
    let eps = rel_tol * max;
    svd.pseudo_inverse(eps.max(f64::MIN_POSITIVE))
        .expect("svd computed with both factors")
}

pub fn symmetrize(m: &mut Mat) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    let mut sym = m.clone();
    symmetrize(&mut sym);
    sym.symmetric_eigenvalues().min()
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Row-stacks a sequence of column vectors into one vector.
pub fn stack(blocks: &[&Vector]) -> Vector {
    let len = blocks.iter().map(|b| b.len()).sum();
    let mut out = Vector::zeros(len);
    let mut offset = 0;
    for b in blocks {
        out.rows_mut(offset, b.len()).copy_from(b);
        offset += b.len();
    }
    out
}

pub fn diag(values: &[f64]) -> Mat {
    Mat::from_diagonal(&Vector::from_column_slice(values))
}
