//! Band-limited Fourier coefficient tensors on the torus and their sample
//! grids.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{CoronaError, Result};
use crate::linalg::pairwise_sum;
use crate::matpoly::MatPoly;
use crate::CVec;

/// Coefficients `c_k`, `k in [-B, B]^n`, of a `dim`-vector valued
/// trigonometric polynomial on `T^n`. Storage is component-major, and within
/// a component row-major in the index with the first variable slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierTensor {
    nvars: usize,
    band: usize,
    dim: usize,
    coeffs: Vec<Complex64>,
}

impl FourierTensor {
    pub fn zeros(nvars: usize, band: usize, dim: usize) -> Self {
        let side = 2 * band + 1;
        Self { nvars, band, dim, coeffs: vec![Complex64::new(0.0, 0.0); dim * side.pow(nvars as u32)] }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `2B + 1`.
    pub fn side(&self) -> usize {
        2 * self.band + 1
    }

    /// Number of indices per component.
    pub fn block(&self) -> usize {
        self.side().pow(self.nvars as u32)
    }

    pub fn raw(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn raw_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Flat offset of an index within one component, `None` outside the band.
    pub fn flat(&self, idx: &[i64]) -> Option<usize> {
        if idx.len() != self.nvars {
            return None;
        }
        let b = self.band as i64;
        let mut off = 0usize;
        for &k in idx {
            if k < -b || k > b {
                return None;
            }
            off = off * self.side() + (k + b) as usize;
        }
        Some(off)
    }

    /// Inverse of [`Self::flat`].
    pub fn unflat(&self, mut off: usize) -> Vec<i64> {
        let side = self.side();
        let mut idx = vec![0i64; self.nvars];
        for slot in idx.iter_mut().rev() {
            *slot = (off % side) as i64 - self.band as i64;
            off /= side;
        }
        idx
    }

    pub fn get(&self, idx: &[i64], comp: usize) -> Complex64 {
        match self.flat(idx) {
            Some(off) if comp < self.dim => self.coeffs[comp * self.block() + off],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn set(&mut self, idx: &[i64], comp: usize, value: Complex64) -> Result<()> {
        let off = self
            .flat(idx)
            .filter(|_| comp < self.dim)
            .ok_or_else(|| CoronaError::InvalidArgument(format!("index {idx:?} / component {comp} outside tensor")))?;
        let block = self.block();
        self.coeffs[comp * block + off] = value;
        Ok(())
    }

    /// `sum_k |c_k|^2`, which equals the squared `L^2(T^n)` norm.
    pub fn norm_sq(&self) -> f64 {
        pairwise_sum(&self.coeffs.iter().map(|c| c.norm_sqr()).collect::<Vec<_>>())
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `<self, other> = sum_k c_k conj(d_k)`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        assert!(self.same_shape(other), "tensor shapes differ");
        pairwise_sum(&self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b.conj()).collect::<Vec<_>>())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.nvars == other.nvars && self.band == other.band && self.dim == other.dim
    }

    pub fn add(&self, other: &Self) -> Self {
        assert!(self.same_shape(other), "tensor shapes differ");
        let mut out = self.clone();
        out.coeffs.iter_mut().zip(&other.coeffs).for_each(|(a, b)| *a += b);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert!(self.same_shape(other), "tensor shapes differ");
        let mut out = self.clone();
        out.coeffs.iter_mut().zip(&other.coeffs).for_each(|(a, b)| *a -= b);
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|a| *a *= s);
        out
    }

    /// Keeps the coefficients whose index satisfies `keep`, zeroing the rest.
    pub fn masked(&self, keep: impl Fn(&[i64]) -> bool) -> Self {
        let block = self.block();
        let flags: Vec<bool> = (0..block).map(|off| keep(&self.unflat(off))).collect();
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            if !flags[i % block] {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    /// Largest coefficient modulus among indices satisfying `pred`.
    pub fn max_abs_where(&self, pred: impl Fn(&[i64]) -> bool) -> f64 {
        let block = self.block();
        let flags: Vec<bool> = (0..block).map(|off| pred(&self.unflat(off))).collect();
        self.coeffs.iter().enumerate().filter(|(i, _)| flags[i % block]).map(|(_, c)| c.norm()).fold(0.0, f64::max)
    }

    /// Coefficients of the column polynomial `p`, placed at `+alpha`.
    pub fn from_analytic(p: &MatPoly, band: usize) -> Result<Self> {
        Self::from_poly(p, band, 1)
    }

    /// Coefficients of `z -> p(conj z)`, placed at `-alpha`.
    pub fn from_anti_analytic(p: &MatPoly, band: usize) -> Result<Self> {
        Self::from_poly(p, band, -1)
    }

    fn from_poly(p: &MatPoly, band: usize, sign: i64) -> Result<Self> {
        if p.cols() != 1 {
            return Err(CoronaError::Dimension("expected a column polynomial".into()));
        }
        let mut t = Self::zeros(p.nvars(), band, p.rows());
        for (idx, c) in p.terms() {
            let k: Vec<i64> = idx.entries().iter().map(|&a| sign * a as i64).collect();
            for comp in 0..p.rows() {
                t.set(&k, comp, c[(comp, 0)]).map_err(|_| CoronaError::InvalidArgument(format!("degree {idx:?} exceeds band {band}")))?;
            }
        }
        Ok(t)
    }

    /// Value of the harmonic extension at `z` in the closed polydisk, with
    /// `z_j^k` for `k >= 0` and `conj(z_j)^|k|` for `k < 0`.
    pub fn eval_harmonic(&self, z: &[Complex64]) -> CVec {
        let block = self.block();
        let b = self.band as i64;
        let powers: Vec<Vec<Complex64>> = z
            .iter()
            .map(|&w| (-b..=b).map(|k| if k >= 0 { w.powi(k as i32) } else { w.conj().powi((-k) as i32) }).collect())
            .collect();
        let mut out = CVec::zeros(self.dim);
        for off in 0..block {
            let idx = self.unflat(off);
            let mono: Complex64 = idx.iter().enumerate().map(|(j, &k)| powers[j][(k + b) as usize]).product();
            for comp in 0..self.dim {
                out[comp] += self.coeffs[comp * block + off] * mono;
            }
        }
        out
    }

    /// Samples on the uniform grid with `side >= 2B + 1` points per variable.
    pub fn to_grid(&self, side: usize) -> Result<TorusGrid> {
        if side < self.side() {
            return Err(CoronaError::InvalidArgument(format!("grid side {side} below 2B+1 = {}", self.side())));
        }
        let mut grid = TorusGrid::zeros(self.nvars, side, self.dim);
        let block = self.block();
        let gblock = grid.block();
        for off in 0..block {
            let idx = self.unflat(off);
            let mut g = 0usize;
            for &k in &idx {
                g = g * side + k.rem_euclid(side as i64) as usize;
            }
            for comp in 0..self.dim {
                grid.data[comp * gblock + g] = self.coeffs[comp * block + off];
            }
        }
        grid.transform(true);
        Ok(grid)
    }

    /// Coefficients `|k_j| <= band` of the grid function (exact inverse of
    /// [`Self::to_grid`] when the grid function is band-limited).
    pub fn from_grid(grid: &TorusGrid, band: usize) -> Result<Self> {
        if grid.side < 2 * band + 1 {
            return Err(CoronaError::InvalidArgument(format!("grid side {} below 2B+1 = {}", grid.side, 2 * band + 1)));
        }
        let mut spec = grid.clone();
        spec.transform(false);
        let norm = (grid.side as f64).powi(grid.nvars as i32).recip();
        let mut t = Self::zeros(grid.nvars, band, grid.dim);
        let block = t.block();
        let gblock = spec.block();
        for off in 0..block {
            let idx = t.unflat(off);
            let mut g = 0usize;
            for &k in &idx {
                g = g * grid.side + k.rem_euclid(grid.side as i64) as usize;
            }
            for comp in 0..grid.dim {
                t.coeffs[comp * block + off] = spec.data[comp * gblock + g] * norm;
            }
        }
        Ok(t)
    }
}

/// Samples of a `dim`-vector function on the uniform grid of `T^n` with
/// `side` points per variable, component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusGrid {
    pub nvars: usize,
    pub side: usize,
    pub dim: usize,
    pub data: Vec<Complex64>,
}

impl TorusGrid {
    pub fn zeros(nvars: usize, side: usize, dim: usize) -> Self {
        Self { nvars, side, dim, data: vec![Complex64::new(0.0, 0.0); dim * side.pow(nvars as u32)] }
    }

    /// Number of grid points.
    pub fn block(&self) -> usize {
        self.side.pow(self.nvars as u32)
    }

    /// Coordinates of grid point `p`.
    pub fn point(&self, mut p: usize) -> Vec<Complex64> {
        let mut z = vec![Complex64::new(0.0, 0.0); self.nvars];
        for slot in z.iter_mut().rev() {
            let i = p % self.side;
            p /= self.side;
            *slot = Complex64::from_polar(1.0, std::f64::consts::TAU * i as f64 / self.side as f64);
        }
        z
    }

    pub fn value(&self, p: usize) -> CVec {
        let block = self.block();
        CVec::from_iterator(self.dim, (0..self.dim).map(|c| self.data[c * block + p]))
    }

    pub fn set_value(&mut self, p: usize, v: &CVec) {
        let block = self.block();
        for c in 0..self.dim {
            self.data[c * block + p] = v[c];
        }
    }

    /// Euclidean norm of the vector value at every point.
    pub fn pointwise_norms(&self) -> Vec<f64> {
        let block = self.block();
        (0..block).map(|p| (0..self.dim).map(|c| self.data[c * block + p].norm_sqr()).sum::<f64>().sqrt()).collect()
    }

    /// Discrete `L^q` norm (mean over the grid); `q = inf` gives the max.
    pub fn lq_norm(&self, q: f64) -> f64 {
        let norms = self.pointwise_norms();
        lq_mean(&norms, q)
    }

    /// Multi-dimensional FFT: forward computes `sum_n v_n e^{-i k theta_n}`,
    /// inverse `sum_k c_k e^{i k theta_n}`, both unnormalized.
    pub fn transform(&mut self, inverse: bool) {
        let mut planner = FftPlanner::<f64>::new();
        let fft = if inverse { planner.plan_fft_inverse(self.side) } else { planner.plan_fft_forward(self.side) };
        for axis in 0..self.nvars {
            self.transform_axis(axis, &fft);
        }
    }

    /// 1-D FFT along `axis` for every line of every component.
    pub fn transform_axis(&mut self, axis: usize, fft: &Arc<dyn Fft<f64>>) {
        let side = self.side;
        let stride = side.pow((self.nvars - 1 - axis) as u32);
        let chunk = side * stride;
        self.data.par_chunks_mut(chunk).for_each(|block| {
            let mut line = vec![Complex64::new(0.0, 0.0); side];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            for inner in 0..stride {
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = block[inner + t * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (t, v) in line.iter().enumerate() {
                    block[inner + t * stride] = *v;
                }
            }
        });
    }
}

/// `(mean x^q)^(1/q)`, or the max for `q = inf`.
pub fn lq_mean(values: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        return values.iter().copied().fold(0.0, f64::max);
    }
    let powered: Vec<f64> = values.iter().map(|v| v.powf(q)).collect();
    (pairwise_sum(&powered) / values.len() as f64).powf(1.0 / q)
}
