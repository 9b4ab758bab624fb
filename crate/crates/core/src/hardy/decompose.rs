//! Per-variable Riesz projections, the splitting of `(H^2)^perp` into
//! one-variable pieces, and the bundle projections onto
//! `Q_j = H^2_j ∩ Pi L^2` and `K_j = Pi L^2 ⊖ Q_j` by alternating
//! projections.
//!
//! Everything lives on the uniform torus grid with `2B + 1` points per
//! variable. On that grid the DFT is unitary, multiplication by `Pi(z)` is an
//! orthogonal projection and every coefficient mask is an orthogonal
//! projection, so the subspace identities hold exactly in the discrete model.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::riesz_constant;
use super::tensor::{FourierTensor, TorusGrid};
use crate::error::{CoronaError, Result};
use crate::matpoly::MatPoly;
use crate::pointwise::pi_map;
use crate::{CMat, CVec};

/// Which half of the spectrum a Riesz projection keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Half {
    /// `k_j >= 0`
    Analytic,
    /// `k_j < 0`
    AntiAnalytic,
}

/// Coefficient mask in variable `var`.
pub fn riesz_project(x: &FourierTensor, var: usize, half: Half) -> Result<FourierTensor> {
    if var >= x.nvars() {
        return Err(CoronaError::VariableOutOfRange { var, nvars: x.nvars() });
    }
    Ok(match half {
        Half::Analytic => x.masked(|k| k[var] >= 0),
        Half::AntiAnalytic => x.masked(|k| k[var] < 0),
    })
}

/// Projection onto `H^2`: every index non-negative.
pub fn project_h2(x: &FourierTensor) -> FourierTensor {
    x.masked(|k| k.iter().all(|&v| v >= 0))
}

/// Splits `h in (H^2)^perp` as `h = h_1 + ... + h_n` with
/// `h_k = (I - P_k) P_{k-1} ... P_1 h` and `P_j` the analytic mask in
/// variable `j`.
pub fn decompose_hperp(h: &FourierTensor) -> Result<Vec<FourierTensor>> {
    let leak = h.max_abs_where(|k| k.iter().all(|&v| v >= 0));
    if leak > 0.0 {
        return Err(CoronaError::Membership(format!("h has an analytic coefficient of size {leak:.3e}")));
    }
    let mut rest = h.clone();
    let mut parts = Vec::with_capacity(h.nvars());
    for var in 0..h.nvars() {
        let kept = riesz_project(&rest, var, Half::Analytic)?;
        parts.push(rest.sub(&kept));
        rest = kept;
    }
    Ok(parts)
}

/// `Pi(z)` at every point of the torus grid with `side` points per variable.
#[derive(Clone, Debug)]
pub struct BundleGrid {
    pub nvars: usize,
    pub side: usize,
    pub dim: usize,
    pis: Vec<CMat>,
}

impl BundleGrid {
    pub fn new(f: &MatPoly, delta_sq: f64, side: usize) -> Result<Self> {
        let probe = TorusGrid::zeros(f.nvars(), side, f.cols());
        let pis: Vec<CMat> = (0..probe.block()).into_par_iter().map(|p| pi_map(f, delta_sq, &probe.point(p))).collect::<Result<_>>()?;
        Ok(Self { nvars: f.nvars(), side, dim: f.cols(), pis })
    }

    /// Grid matching a tensor of band `band`.
    pub fn for_band(f: &MatPoly, delta_sq: f64, band: usize) -> Result<Self> {
        Self::new(f, delta_sq, 2 * band + 1)
    }

    pub fn band(&self) -> usize {
        (self.side - 1) / 2
    }

    pub fn pi_at(&self, p: usize) -> &CMat {
        &self.pis[p]
    }

    /// Pointwise `Pi(z) x(z)`.
    pub fn apply(&self, x: &TorusGrid) -> TorusGrid {
        let vals: Vec<CVec> = (0..x.block()).into_par_iter().map(|p| &self.pis[p] * x.value(p)).collect();
        let mut out = x.clone();
        for (p, v) in vals.iter().enumerate() {
            out.set_value(p, v);
        }
        out
    }

    fn check(&self, x: &FourierTensor) -> Result<()> {
        if x.nvars() != self.nvars || x.side() != self.side || x.dim() != self.dim {
            return Err(CoronaError::Dimension(format!(
                "tensor (n={}, side={}, dim={}) does not match bundle grid (n={}, side={}, dim={})",
                x.nvars(),
                x.side(),
                x.dim(),
                self.nvars,
                self.side,
                self.dim
            )));
        }
        Ok(())
    }

    /// `Pi x` as a tensor.
    pub fn apply_tensor(&self, x: &FourierTensor) -> Result<FourierTensor> {
        self.check(x)?;
        FourierTensor::from_grid(&self.apply(&x.to_grid(self.side)?), self.band())
    }

    /// `||Pi x - x||_2`.
    pub fn invariance_residual(&self, x: &FourierTensor) -> Result<f64> {
        Ok(self.apply_tensor(x)?.sub(x).norm())
    }
}

/// Analytic mask in variable `var` applied to grid samples.
fn grid_mask_analytic(x: &TorusGrid, var: usize, planner: &mut FftPlanner<f64>) -> TorusGrid {
    let side = x.side;
    let band = (side - 1) / 2;
    let mut y = x.clone();
    y.transform_axis(var, &planner.plan_fft_forward(side));
    let stride = side.pow((x.nvars - 1 - var) as u32);
    let scale = 1.0 / side as f64;
    for (i, v) in y.data.iter_mut().enumerate() {
        let bin = (i / stride) % side;
        if bin > band {
            *v = Complex64::new(0.0, 0.0);
        } else {
            *v *= scale;
        }
    }
    y.transform_axis(var, &planner.plan_fft_inverse(side));
    y
}

fn grid_dist(a: &TorusGrid, b: &TorusGrid) -> f64 {
    let s: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).norm_sqr()).sum();
    (s / a.block() as f64).sqrt()
}

/// Outcome of an alternating-projection run.
#[derive(Clone, Debug)]
pub struct Projection {
    pub value: FourierTensor,
    pub iterations: usize,
    pub converged: bool,
    /// `L^2` distance between the last two iterates.
    pub last_step: f64,
}

/// `P_{Q_j} xi` by alternating the analytic mask in variable `var` with
/// pointwise multiplication by `Pi`, until successive iterates differ by less
/// than `tol` in `L^2` or `max_iter` rounds have run. The returned value is in
/// `Pi L^2` exactly; on non-convergence it is the last iterate.
pub fn project_qj(xi: &FourierTensor, bundle: &BundleGrid, var: usize, max_iter: usize, tol: f64) -> Result<Projection> {
    bundle.check(xi)?;
    if var >= xi.nvars() {
        return Err(CoronaError::VariableOutOfRange { var, nvars: xi.nvars() });
    }
    let mut planner = FftPlanner::new();
    let mut x = xi.to_grid(bundle.side)?;
    let mut last_step = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let next = bundle.apply(&grid_mask_analytic(&x, var, &mut planner));
        last_step = grid_dist(&next, &x);
        x = next;
        iterations += 1;
        if last_step < tol {
            converged = true;
            break;
        }
    }
    Ok(Projection { value: FourierTensor::from_grid(&x, bundle.band())?, iterations, converged, last_step })
}

/// `P_{K_j} xi = xi - P_{Q_j} xi`.
pub fn project_kj(xi: &FourierTensor, bundle: &BundleGrid, var: usize, max_iter: usize, tol: f64) -> Result<Projection> {
    let q = project_qj(xi, bundle, var, max_iter, tol)?;
    Ok(Projection { value: xi.sub(&q.value), ..q })
}

/// `xi = xi_1 + ... + xi_n + xi^n` with `xi_j in K_j`, built by peeling
/// `xi^j = P_{Q_j} xi^{j-1}`, `xi_j = xi^{j-1} - xi^j`.
#[derive(Clone, Debug)]
pub struct KDecomposition {
    pub parts: Vec<FourierTensor>,
    /// `xi^n = P_{Q_n} ... P_{Q_1} xi`, which vanishes for `xi` in `K`.
    pub remainder: FourierTensor,
    pub iterations: Vec<usize>,
    pub converged: bool,
}

impl KDecomposition {
    /// `||sum_j xi_j - xi||_2`.
    pub fn reconstruction_error(&self, xi: &FourierTensor) -> f64 {
        let mut sum = FourierTensor::zeros(xi.nvars(), xi.band(), xi.dim());
        for p in &self.parts {
            sum = sum.add(p);
        }
        sum.sub(xi).norm()
    }

    /// `|  ||xi||^2 - sum_j ||xi_j||^2 |`.
    pub fn pythagoras_gap(&self, xi: &FourierTensor) -> f64 {
        (xi.norm_sq() - self.parts.iter().map(FourierTensor::norm_sq).sum::<f64>()).abs()
    }

    /// Discrete `L^q` norms of `xi_j` on a grid with `side` points per
    /// variable, with the bounds `C(q)^j ||xi||_q` (`j` counted from 1).
    pub fn lq_bounds(&self, xi: &FourierTensor, q: f64, side: usize) -> Result<Vec<(f64, f64)>> {
        let base = xi.to_grid(side)?.lq_norm(q);
        let c = riesz_constant(q);
        self.parts
            .iter()
            .enumerate()
            .map(|(j, part)| Ok((part.to_grid(side)?.lq_norm(q), c.powi(j as i32 + 1) * base)))
            .collect()
    }
}

/// Relative `Pi`-invariance slack accepted on input to [`decompose_k`].
pub const INVARIANCE_TOL: f64 = 1e-8;

/// The decomposition of `xi in K` into pieces in `K_1, ..., K_n`, with
/// `P_{Q_j}` computed by [`project_qj`].
pub fn decompose_k(xi: &FourierTensor, bundle: &BundleGrid, max_iter: usize, tol: f64) -> Result<KDecomposition> {
    let inv = bundle.invariance_residual(xi)?;
    if inv > INVARIANCE_TOL * xi.norm().max(1.0) {
        return Err(CoronaError::Membership(format!("xi is not Pi-invariant (residual {inv:.3e})")));
    }
    let mut rest = xi.clone();
    let mut parts = Vec::with_capacity(xi.nvars());
    let mut iterations = Vec::with_capacity(xi.nvars());
    let mut converged = true;
    for var in 0..xi.nvars() {
        let q = project_qj(&rest, bundle, var, max_iter, tol)?;
        parts.push(rest.sub(&q.value));
        iterations.push(q.iterations);
        converged &= q.converged;
        rest = q.value;
    }
    Ok(KDecomposition { parts, remainder: rest, iterations, converged })
}


#[cfg(test)]
mod proptests {
    use super::*;
    use crate::instance::{generate_instance, GenerateSpec};
    use crate::suite::random_hperp;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn riesz_masks_are_commuting_projections(seed in any::<u64>(), nvars in 1usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = FourierTensor::zeros(nvars, 3, 2);
            for v in x.raw_mut() {
                *v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
            let analytic = project_h2(&x);
            prop_assert!(project_h2(&analytic).sub(&analytic).norm() == 0.0);
            prop_assert!(analytic.max_abs_where(|k| k.iter().any(|&v| v < 0)) == 0.0);
            for var in 0..nvars {
                let a = riesz_project(&x, var, Half::Analytic).unwrap();
                let b = riesz_project(&x, var, Half::AntiAnalytic).unwrap();
                prop_assert!(riesz_project(&a, var, Half::Analytic).unwrap().sub(&a).norm() == 0.0);
                prop_assert!(a.add(&b).sub(&x).norm() == 0.0);
                prop_assert!(a.inner(&b).norm() == 0.0);
                for other in 0..nvars {
                    let ab = riesz_project(&a, other, Half::Analytic).unwrap();
                    let ba = riesz_project(&riesz_project(&x, other, Half::Analytic).unwrap(), var, Half::Analytic).unwrap();
                    prop_assert!(ab.sub(&ba).norm() == 0.0);
                }
            }
        }

        #[test]
        fn hperp_splitting_reconstructs_exactly(seed in any::<u64>(), nvars in 1usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hperp(&mut rng, nvars, 4, 2, 3);
            let parts = decompose_hperp(&h).unwrap();
            prop_assert_eq!(parts.len(), nvars);
            let mut sum = FourierTensor::zeros(nvars, 4, 2);
            for (j, p) in parts.iter().enumerate() {
                prop_assert!(p.max_abs_where(|k| k[j] >= 0) == 0.0);
                sum = sum.add(p);
            }
            prop_assert!(sum.sub(&h).norm() == 0.0);
        }

        #[test]
        fn bundle_grid_is_projection_on_tensors(seed in 0u64..10_000) {
            let r = 1 + (seed % 2) as usize;
            let inst = generate_instance(&GenerateSpec::new(r, r + 1 + (seed % 2) as usize, 2, 1, 0.4, seed)).unwrap();
            let bundle = BundleGrid::for_band(&inst.f, inst.delta_sq, 4).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hperp(&mut rng, 2, 4, inst.cols(), 3);
            let once = bundle.apply_tensor(&h).unwrap();
            let twice = bundle.apply_tensor(&once).unwrap();
            prop_assert!(twice.sub(&once).norm() < 1e-12 * h.norm().max(1.0));
            prop_assert!(once.norm() <= h.norm() * (1.0 + 1e-12));
        }
    }
}
