//! Matrix-valued analytic polynomials in `n` complex variables.
//!
//! Coefficients are stored sparsely by multi-index. Only analytic exponents
//! exist here: conjugate objects such as `F*` are produced as pointwise
//! values ([`MatPoly::adjoint_eval`]) and never as polynomials.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{CoronaError, Result};
use crate::CMat;

/// Taylor exponent per variable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Self {
        Self(entries)
    }

    pub fn zero(nvars: usize) -> Self {
        Self(vec![0; nvars])
    }

    /// The exponent of `z_var^power` alone.
    pub fn single(nvars: usize, var: usize, power: usize) -> Self {
        let mut e = vec![0; nvars];
        e[var] = power;
        Self(e)
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total_degree(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `z^alpha` at the point `z`.
    pub fn monomial(&self, z: &[Complex64]) -> Complex64 {
        self.0
            .iter()
            .zip(z)
            .fold(Complex64::new(1.0, 0.0), |acc, (&k, &zj)| acc * zj.powu(k as u32))
    }
}

/// A matrix value of a [`MatPoly`] at a point of the closed polydisk.
#[derive(Clone, Debug)]
pub struct PointValue {
    pub point: Vec<Complex64>,
    pub matrix: CMat,
}

/// `P(z) = sum_alpha C_alpha z^alpha` with `rows x cols` complex coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct MatPoly {
    rows: usize,
    cols: usize,
    nvars: usize,
    coeffs: BTreeMap<MultiIndex, CMat>,
}

impl MatPoly {
    /// The zero polynomial of the given shape.
    pub fn zeros(rows: usize, cols: usize, nvars: usize) -> Self {
        Self { rows, cols, nvars, coeffs: BTreeMap::new() }
    }

    pub fn constant(value: CMat, nvars: usize) -> Self {
        let mut p = Self::zeros(value.nrows(), value.ncols(), nvars);
        p.coeffs.insert(MultiIndex::zero(nvars), value);
        p
    }

    pub fn identity(size: usize, nvars: usize) -> Self {
        Self::constant(CMat::identity(size, size), nvars)
    }

    pub fn from_coeffs<I>(rows: usize, cols: usize, nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, CMat)>,
    {
        let mut p = Self::zeros(rows, cols, nvars);
        for (idx, mat) in terms {
            p.add_term(idx, mat)?;
        }
        Ok(p)
    }

    /// Adds `mat * z^idx` to the polynomial.
    pub fn add_term(&mut self, idx: MultiIndex, mat: CMat) -> Result<()> {
        if idx.len() != self.nvars {
            return Err(CoronaError::Dimension(format!(
                "multi-index of length {} for {} variable(s)",
                idx.len(),
                self.nvars
            )));
        }
        if mat.shape() != (self.rows, self.cols) {
            return Err(CoronaError::Dimension(format!(
                "coefficient of shape {:?}, polynomial is {}x{}",
                mat.shape(),
                self.rows,
                self.cols
            )));
        }
        match self.coeffs.get_mut(&idx) {
            Some(existing) => *existing += mat,
            None => {
                self.coeffs.insert(idx, mat);
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn coeff(&self, idx: &MultiIndex) -> Option<&CMat> {
        self.coeffs.get(idx)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &CMat)> {
        self.coeffs.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.values().all(|m| m.iter().all(|c| c.norm_sqr() == 0.0))
    }

    /// Highest exponent of variable `var` among stored terms.
    pub fn degree_in(&self, var: usize) -> usize {
        self.coeffs.keys().map(|k| k.entries()[var]).max().unwrap_or(0)
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.nvars).map(|j| self.degree_in(j)).collect()
    }

    pub fn total_degree(&self) -> usize {
        self.coeffs.keys().map(MultiIndex::total_degree).max().unwrap_or(0)
    }

    /// Coefficient `l^2` norm, which equals the boundary `L^2(T^n)` norm.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.values().map(|m| m.norm_squared()).sum::<f64>().sqrt()
    }

    fn check_point(&self, z: &[Complex64]) -> Result<()> {
        if z.len() != self.nvars {
            return Err(CoronaError::Dimension(format!(
                "point has {} coordinate(s), polynomial has {} variable(s)",
                z.len(),
                self.nvars
            )));
        }
        Ok(())
    }

    fn check_var(&self, var: usize) -> Result<()> {
        if var >= self.nvars {
            return Err(CoronaError::VariableOutOfRange { var, nvars: self.nvars });
        }
        Ok(())
    }

    /// `P(z)`. Powers of each coordinate are tabulated once, then every stored
    /// term is accumulated.
    pub fn eval(&self, z: &[Complex64]) -> Result<CMat> {
        self.check_point(z)?;
        let powers: Vec<Vec<Complex64>> = (0..self.nvars)
            .map(|j| {
                let d = self.degree_in(j);
                let mut row = Vec::with_capacity(d + 1);
                let mut acc = Complex64::new(1.0, 0.0);
                for _ in 0..=d {
                    row.push(acc);
                    acc *= z[j];
                }
                row
            })
            .collect();
        let mut out = CMat::zeros(self.rows, self.cols);
        for (idx, mat) in &self.coeffs {
            let mono = idx
                .entries()
                .iter()
                .enumerate()
                .fold(Complex64::new(1.0, 0.0), |acc, (j, &k)| acc * powers[j][k]);
            out.zip_apply(mat, |o, c| *o += c * mono);
        }
        Ok(out)
    }

    pub fn point_value(&self, z: &[Complex64]) -> Result<PointValue> {
        Ok(PointValue { point: z.to_vec(), matrix: self.eval(z)? })
    }

    /// `P(z)*`, the conjugate transpose of the value. `F*` is anti-analytic,
    /// so it only exists pointwise.
    pub fn adjoint_eval(&self, z: &[Complex64]) -> Result<CMat> {
        Ok(self.eval(z)?.adjoint())
    }

    /// `dP / dz_var` (variables are numbered from 0).
    pub fn dz(&self, var: usize) -> Result<MatPoly> {
        self.check_var(var)?;
        let mut out = MatPoly::zeros(self.rows, self.cols, self.nvars);
        for (idx, mat) in &self.coeffs {
            let k = idx.entries()[var];
            if k == 0 {
                continue;
            }
            let mut e = idx.entries().to_vec();
            e[var] = k - 1;
            out.add_term(MultiIndex(e), mat.scale(k as f64))?;
        }
        Ok(out)
    }

    /// Coefficient convolution `P * Q`.
    pub fn mul(&self, other: &MatPoly) -> Result<MatPoly> {
        if self.cols != other.rows || self.nvars != other.nvars {
            return Err(CoronaError::Dimension(format!(
                "cannot multiply {}x{} (n={}) by {}x{} (n={})",
                self.rows, self.cols, self.nvars, other.rows, other.cols, other.nvars
            )));
        }
        let mut out = MatPoly::zeros(self.rows, other.cols, self.nvars);
        for (ia, a) in &self.coeffs {
            for (ib, b) in &other.coeffs {
                out.add_term(ia.plus(ib), a * b)?;
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &MatPoly) -> Result<MatPoly> {
        if (self.rows, self.cols, self.nvars) != (other.rows, other.cols, other.nvars) {
            return Err(CoronaError::Dimension("addends differ in shape".into()));
        }
        let mut out = self.clone();
        for (idx, mat) in &other.coeffs {
            out.add_term(idx.clone(), mat.clone())?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &MatPoly) -> Result<MatPoly> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> MatPoly {
        let mut out = self.clone();
        for m in out.coeffs.values_mut() {
            *m *= s;
        }
        out
    }

    pub fn scale_real(&self, s: f64) -> MatPoly {
        self.scale(Complex64::new(s, 0.0))
    }

    /// Drops coefficients whose entries are all exactly zero.
    pub fn pruned(&self) -> MatPoly {
        let mut out = self.clone();
        out.coeffs.retain(|_, m| m.iter().any(|c| c.norm_sqr() != 0.0));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// `[1, z]` as a 1x2 polynomial in one variable.
    fn one_z() -> MatPoly {
        MatPoly::from_coeffs(
            1,
            2,
            1,
            [
                (MultiIndex::new(vec![0]), CMat::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)])),
                (MultiIndex::new(vec![1]), CMat::from_row_slice(1, 2, &[c(0.0, 0.0), c(1.0, 0.0)])),
            ],
        )
        .unwrap()
    }

    pub(crate) fn random_poly(rng: &mut ChaCha8Rng, rows: usize, cols: usize, nvars: usize, deg: usize) -> MatPoly {
        let mut p = MatPoly::zeros(rows, cols, nvars);
        let mut idx = vec![0usize; nvars];
        loop {
            if idx.iter().sum::<usize>() <= deg {
                let m = CMat::from_fn(rows, cols, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
                p.add_term(MultiIndex::new(idx.clone()), m).unwrap();
            }
            let mut j = 0;
            while j < nvars {
                idx[j] += 1;
                if idx[j] <= deg {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == nvars {
                break;
            }
        }
        p
    }

    fn random_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::from_polar(rng.random_range(0.0..1.0), rng.random_range(0.0..std::f64::consts::TAU)))
            .collect()
    }

    /// Independent sum over monomials with `powu`.
    fn naive_eval(p: &MatPoly, z: &[Complex64]) -> CMat {
        let mut out = CMat::zeros(p.rows(), p.cols());
        for (idx, m) in p.terms() {
            out += m * idx.monomial(z);
        }
        out
    }

    #[test]
    fn eval_hand_values() {
        let p = one_z();
        let v0 = p.eval(&[c(0.0, 0.0)]).unwrap();
        assert_eq!(v0, CMat::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]));
        let vi = p.eval(&[c(0.0, 1.0)]).unwrap();
        assert_eq!(vi, CMat::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 1.0)]));
    }

    #[test]
    fn eval_rejects_wrong_arity() {
        assert!(matches!(one_z().eval(&[c(0.0, 0.0), c(0.0, 0.0)]), Err(CoronaError::Dimension(_))));
    }

    #[test]
    fn eval_matches_monomial_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            let p = random_poly(&mut rng, 2, 3, n, 4);
            for _ in 0..10 {
                let z = random_point(&mut rng, n);
                let err = (p.eval(&z).unwrap() - naive_eval(&p, &z)).norm();
                assert!(err < 1e-14, "n={n} err={err}");
            }
        }
    }

    #[test]
    fn dz_hand_values() {
        let d = one_z().dz(0).unwrap();
        assert_eq!(d.eval(&[c(0.3, 0.2)]).unwrap(), CMat::from_row_slice(1, 2, &[c(0.0, 0.0), c(1.0, 0.0)]));
        let k = MatPoly::constant(CMat::from_element(2, 2, c(1.0, 2.0)), 2);
        assert!(k.dz(1).unwrap().is_zero());
        assert!(matches!(k.dz(2), Err(CoronaError::VariableOutOfRange { .. })));
    }

    #[test]
    fn dz_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for n in 1..=2 {
            let p = random_poly(&mut rng, 2, 2, n, 3);
            for var in 0..n {
                let d = p.dz(var).unwrap();
                let z = random_point(&mut rng, n);
                let mut zp = z.clone();
                zp[var] += h;
                let fd = (p.eval(&zp).unwrap() - p.eval(&z).unwrap()) / c(h, 0.0);
                assert!((fd - d.eval(&z).unwrap()).norm() < 1e-5);
            }
        }
    }

    #[test]
    fn mul_hand_and_identity() {
        let col = MatPoly::from_coeffs(
            2,
            1,
            1,
            [
                (MultiIndex::new(vec![1]), CMat::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)])),
                (MultiIndex::new(vec![0]), CMat::from_column_slice(2, 1, &[c(0.0, 0.0), c(1.0, 0.0)])),
            ],
        )
        .unwrap();
        // [1, z] . [z; 1] = 2z
        let prod = one_z().mul(&col).unwrap().pruned();
        assert_eq!(prod.num_terms(), 1);
        assert_eq!(prod.coeff(&MultiIndex::new(vec![1])).unwrap()[(0, 0)], c(2.0, 0.0));
        let same = one_z().mul(&MatPoly::identity(2, 1)).unwrap();
        assert_eq!(same, one_z());
        assert!(one_z().mul(&one_z()).is_err());
    }

    #[test]
    fn mul_matches_pointwise_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_poly(&mut rng, 2, 3, 2, 2);
        let q = random_poly(&mut rng, 3, 2, 2, 3);
        let pq = p.mul(&q).unwrap();
        for _ in 0..20 {
            let z = random_point(&mut rng, 2);
            let err = (pq.eval(&z).unwrap() - p.eval(&z).unwrap() * q.eval(&z).unwrap()).norm();
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn adjoint_eval_hand_values() {
        let v = one_z().adjoint_eval(&[c(0.0, 1.0)]).unwrap();
        assert_eq!(v, CMat::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, -1.0)]));
        let real = CMat::from_row_slice(2, 3, &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0), c(5.0, 0.0), c(6.0, 0.0)]);
        let k = MatPoly::constant(real.clone(), 1);
        assert_eq!(k.adjoint_eval(&[c(0.5, 0.5)]).unwrap(), real.transpose());
    }

    #[test]
    fn product_rule_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = random_poly(&mut rng, 2, 2, 1, 3);
        let q = random_poly(&mut rng, 2, 1, 1, 2);
        let lhs = p.mul(&q).unwrap().dz(0).unwrap();
        let rhs = p.dz(0).unwrap().mul(&q).unwrap().add(&p.mul(&q.dz(0).unwrap()).unwrap()).unwrap();
        for _ in 0..20 {
            let z = random_point(&mut rng, 1);
            assert!((lhs.eval(&z).unwrap() - rhs.eval(&z).unwrap()).norm() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn eval_is_linear(seed in 0u64..1000, re in -1.0f64..1.0, im in -1.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_poly(&mut rng, 2, 2, 1, 3);
            let q = random_poly(&mut rng, 2, 2, 1, 3);
            let z = [c(re, im) * 0.7];
            let lhs = p.add(&q).unwrap().eval(&z).unwrap();
            let rhs = p.eval(&z).unwrap() + q.eval(&z).unwrap();
            prop_assert!((lhs - rhs).norm() < 1e-14);
        }

        #[test]
        fn mul_is_associative(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_poly(&mut rng, 1, 2, 1, 2);
            let q = random_poly(&mut rng, 2, 2, 1, 2);
            let r = random_poly(&mut rng, 2, 1, 1, 2);
            let z = random_point(&mut rng, 1);
            let a = p.mul(&q).unwrap().mul(&r).unwrap().eval(&z).unwrap();
            let b = p.mul(&q.mul(&r).unwrap()).unwrap().eval(&z).unwrap();
            prop_assert!((a - b).norm() < 1e-12);
        }

        #[test]
        fn double_adjoint_is_eval(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_poly(&mut rng, 2, 3, 2, 2);
            let z = random_point(&mut rng, 2);
            let back = p.adjoint_eval(&z).unwrap().adjoint();
            prop_assert!((back - p.eval(&z).unwrap()).norm() < 1e-15);
        }
    }
}
