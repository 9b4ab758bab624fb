//! Small dense helpers on top of `nalgebra` for Hermitian matrices.

use nalgebra::{Cholesky, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{CoronaError, Result};
use crate::CMat;

/// `(A + A*) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Extreme eigenvalues `(min, max)` of a Hermitian matrix.
pub fn hermitian_extremes(a: &CMat) -> (f64, f64) {
    if a.nrows() == 1 {
        let v = a[(0, 0)].re;
        return (v, v);
    }
    let vals = hermitian_eigenvalues(a);
    (vals[0], vals[vals.len() - 1])
}

/// Squared spectral norm `||A||^2 = lambda_max(A* A)`.
pub fn op_norm_sq(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let gram = if a.nrows() <= a.ncols() {
        a * a.adjoint()
    } else {
        a.adjoint() * a
    };
    hermitian_extremes(&gram).1.max(0.0)
}

/// Singular values of `A` above a threshold with their left and right
/// vectors as columns of `u` and `v`, largest first.
#[derive(Clone, Debug)]
pub struct SingularTriplets {
    pub values: Vec<f64>,
    pub u: CMat,
    pub v: CMat,
}

/// Singular triplets with `sigma > rel_tol * sigma_max`, read off the
/// positive eigenpairs `(sigma, (u, v) / sqrt 2)` of `[[0, A], [A*, 0]]`.
pub fn singular_triplets(a: &CMat, rel_tol: f64) -> SingularTriplets {
    let (m, n) = a.shape();
    let mut dil = CMat::zeros(m + n, m + n);
    dil.view_mut((0, m), (m, n)).copy_from(a);
    dil.view_mut((m, 0), (n, m)).copy_from(&a.adjoint());
    let eig = SymmetricEigen::new(dil);
    let smax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut keep: Vec<usize> = (0..m + n).filter(|&k| eig.eigenvalues[k] > rel_tol * smax && eig.eigenvalues[k] > 0.0).collect();
    keep.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let s2 = Complex64::new(std::f64::consts::SQRT_2, 0.0);
    SingularTriplets {
        values: keep.iter().map(|&k| eig.eigenvalues[k]).collect(),
        u: CMat::from_fn(m, keep.len(), |i, j| eig.eigenvectors[(i, keep[j])] * s2),
        v: CMat::from_fn(n, keep.len(), |i, j| eig.eigenvectors[(m + i, keep[j])] * s2),
    }
}

/// Inverse of a Hermitian positive definite matrix via Cholesky.
pub fn hpd_inverse(a: &CMat) -> Result<CMat> {
    Cholesky::new(hermitian_part(a))
        .map(|c| c.inverse())
        .ok_or(CoronaError::Singular)
}

/// `log det A` for Hermitian positive definite `A`, summed from the Cholesky
/// diagonal so large or tiny determinants do not overflow.
pub fn hpd_log_det(a: &CMat) -> Result<f64> {
    let chol = Cholesky::new(hermitian_part(a)).ok_or_else(|| {
        let (lo, _) = hermitian_extremes(a);
        CoronaError::NonPositiveDeterminant(lo)
    })?;
    let l = chol.l_dirty();
    Ok((0..a.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// Trace of a product `tr(A B)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Frobenius distance `||A - B||_F`.
pub fn frob_dist(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm()
}

/// Pairwise summation in a fixed order, so reductions are reproducible
/// independent of how the terms were produced.
pub fn pairwise_sum<T>(terms: &[T]) -> T
where
    T: Copy + Default + std::ops::Add<Output = T>,
{
    const LEAF: usize = 32;
    if terms.len() <= LEAF {
        return terms.iter().fold(T::default(), |acc, &t| acc + t);
    }
    let mid = terms.len() / 2;
    pairwise_sum(&terms[..mid]) + pairwise_sum(&terms[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn reconstruct(t: &SingularTriplets) -> CMat {
        let s = CMat::from_diagonal(&nalgebra::DVector::from_iterator(t.values.len(), t.values.iter().map(|v| c(*v, 0.0))));
        &t.u * s * t.v.adjoint()
    }

    #[test]
    fn triplets_of_banded_toeplitz_block() {
        // [c T_1 | T_{a + b z}] finite section, the shape produced by the solver
        let n = 13;
        let (cc, a0, b1) = (c(0.39, 0.0), c(0.17, -0.067), c(0.0019, -0.736));
        let a = CMat::from_fn(n + 1, 2 * n, |i, j| {
            if j < n {
                if i == j { cc } else { c(0.0, 0.0) }
            } else if i == j - n {
                a0
            } else if i == j - n + 1 {
                b1
            } else {
                c(0.0, 0.0)
            }
        });
        let t = singular_triplets(&a, 1e-10);
        assert_eq!(t.values.len(), n + 1);
        assert!((reconstruct(&t) - &a).norm() < 1e-12);
        let k = t.values.len();
        assert!((t.u.adjoint() * &t.u - CMat::identity(k, k)).norm() < 1e-12);
        assert!((t.v.adjoint() * &t.v - CMat::identity(k, k)).norm() < 1e-12);
        assert!(t.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn triplets_drop_null_directions() {
        let a = CMat::from_row_slice(2, 3, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0), c(2.0, 0.0), c(0.0, 2.0), c(0.0, 0.0)]);
        let t = singular_triplets(&a, 1e-10);
        assert_eq!(t.values.len(), 1);
        assert!((t.values[0] - 10f64.sqrt()).abs() < 1e-14);
        assert!((reconstruct(&t) - &a).norm() < 1e-14);
    }

    #[test]
    fn extremes_of_diagonal() {
        let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(3.0, 0.0), c(0.5, 0.0)]));
        let (lo, hi) = hermitian_extremes(&a);
        assert!((lo - 0.5).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
    }

    #[test]
    fn log_det_matches_product() {
        let a = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(3.0, 0.0)]);
        let ld = hpd_log_det(&a).unwrap();
        assert!((ld - 5.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn op_norm_of_row() {
        let a = CMat::from_row_slice(1, 2, &[c(3.0, 0.0), c(0.0, 4.0)]);
        assert!((op_norm_sq(&a) - 25.0).abs() < 1e-12);
    }

    #[test]
    fn singular_inverse_is_error() {
        let a = CMat::zeros(2, 2);
        assert!(hpd_inverse(&a).is_err());
    }

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499500.0);
    }
}
