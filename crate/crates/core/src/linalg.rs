//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Singular values in descending order together with the matching right
/// singular vectors (as columns). Wide inputs are padded with zero rows so that
/// a full basis of right singular vectors is always returned.
pub fn right_svd(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (r, c) = m.shape();
    let padded;
    let src = if r < c {
        padded = {
            let mut p = DMatrix::zeros(c, c);
            p.rows_mut(0, r).copy_from(m);
            p
        };
        &padded
    } else {
        m
    };
    let svd = src.clone().svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let vecs = DMatrix::from_fn(c, c, |row, col| v_t[(order[col], row)]);
    (values, vecs)
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Smallest singular value over `min(rows, cols)` and the right singular
/// vector of the smallest singular value over all columns (zero when wide).
pub fn min_right_singular(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let (values, vecs) = right_svd(m);
    let last = vecs.ncols() - 1;
    let sigma = if m.nrows() < m.ncols() { 0.0 } else { values[last] };
    (sigma, vecs.column(last).into_owned())
}

/// 2-norm condition number; infinite for singular or empty input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Numerical rank with a threshold relative to the largest singular value.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let Some(&top) = s.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * top).count()
}

pub fn inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(what.to_string()))
}

pub fn determinant(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    m.clone().determinant()
}

/// Minimum-norm least-squares solution of `j x = rhs`.
pub fn min_norm_solve(j: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let svd = j.clone().svd(true, true);
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = (top * 1e-13).max(f64::MIN_POSITIVE);
    svd.solve(rhs, eps).unwrap_or_else(|_| DVector::zeros(j.ncols()))
}

pub fn normalize(v: &DVector<f64>) -> DVector<f64> {
    let n = v.norm();
    if n == 0.0 {
        v.clone()
    } else {
        v / n
    }
}

/// Deterministic per-task stream derived from a base seed.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

pub fn gaussian_vector(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_matrix(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn unit_vector(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    loop {
        let v = gaussian_vector(rng, n);
        if v.norm() > 1e-12 {
            return normalize(&v);
        }
    }
}

/// Projective distance `min(|a - b|, |a + b|)`.
pub fn projective_distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm().min((a + b).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn right_svd_sorted_and_orthonormal() {
        let mut rng = rng_for(1, 2);
        let m = gaussian_matrix(&mut rng, 5, 3);
        let (s, v) = right_svd(&m);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        assert!((v.transpose() * &v - DMatrix::identity(3, 3)).norm() < 1e-12);
        for (i, sv) in s.iter().enumerate() {
            assert!(((&m * v.column(i)).norm() - sv).abs() < 1e-12);
        }
    }

    #[test]
    fn wide_matrix_has_kernel() {
        let mut rng = rng_for(3, 4);
        let m = gaussian_matrix(&mut rng, 2, 4);
        let (sigma, v) = min_right_singular(&m);
        assert_eq!(sigma, 0.0);
        assert!((&m * v).norm() < 1e-12);
    }

    #[test]
    fn rank_and_condition() {
        let m = DMatrix::from_row_slice(3, 3, &[1., 2., 3., 2., 4., 6., 0., 0., 1.]);
        assert_eq!(numerical_rank(&m, 1e-10), 2);
        assert!(condition_number(&m) > 1e12);
        assert_eq!(condition_number(&DMatrix::identity(3, 3)), 1.0);
    }

    #[test]
    fn streams_are_reproducible() {
        let a = gaussian_vector(&mut rng_for(7, 11), 4);
        let b = gaussian_vector(&mut rng_for(7, 11), 4);
        let c = gaussian_vector(&mut rng_for(7, 12), 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
