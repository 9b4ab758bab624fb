//! The subharmonic potentials built from the corona data:
//! `phi = log det(FF*) - r log delta^2`, `lambda = tr (FF*)^-1` and
//! `psi = lambda + phi / delta^2`, with their normalized Laplacians
//! `dd̄ = Delta / 4` in closed form.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CoronaError, Result};
use crate::linalg::{hpd_log_det, op_norm_sq, trace_product};
use crate::matpoly::MatPoly;
use crate::pointwise::{disk_samples, gram, polydisk_samples, BundleFrame, CoronaInstance};
use crate::CMat;

/// Slack used by every pass/fail decision in this module.
pub const POTENTIAL_TOL: f64 = 1e-8;

/// `K = r log(1/delta^2)`, the sup bound of `phi`.
pub fn k_bound(r: usize, delta_sq: f64) -> f64 {
    r as f64 * (1.0 / delta_sq).ln()
}

/// `L = 2 K / delta^2`, the sup bound of `psi` when `delta^2 <= 1/e`.
pub fn l_bound(r: usize, delta_sq: f64) -> f64 {
    2.0 * k_bound(r, delta_sq) / delta_sq
}

/// `|d/dt det A(t) - det A(t) tr(A(t)^-1 A'(t))|` with both derivatives by
/// central differences of step `h`.
pub fn det_derivative_check(a: &dyn Fn(f64) -> CMat, t: f64, h: f64) -> Result<f64> {
    let at = a(t);
    let inv = at.clone().try_inverse().ok_or(CoronaError::Singular)?;
    let (ap, am) = (a(t + h), a(t - h));
    let scale = Complex64::new(1.0 / (2.0 * h), 0.0);
    let d_det = (ap.determinant() - am.determinant()) * scale;
    let d_a = (ap - am) * scale;
    Ok((d_det - at.determinant() * trace_product(&inv, &d_a)).norm())
}

/// `(phi, lambda, psi)` at `z`.
pub fn potentials_at(f: &MatPoly, delta_sq: f64, z: &[Complex64]) -> Result<(f64, f64, f64)> {
    let g = gram(f, z)?;
    let phi = hpd_log_det(&g)? - f.rows() as f64 * delta_sq.ln();
    let lambda = crate::linalg::hpd_inverse(&g)?.trace().re;
    Ok((phi, lambda, lambda + phi / delta_sq))
}

/// Closed-form pieces of the Laplacians at one frame.
#[derive(Clone, Copy, Debug)]
pub struct LaplacianTerms {
    /// `tr[(FF*)^-1 F' Pi (F')*]`
    pub phi: f64,
    /// `tr[Phi* (F')* (FF*)^-1 F' Phi] - tr[(FF*)^-1 F' Pi (F')* (FF*)^-1]`
    pub lambda: f64,
    /// `||d Pi||^2` (operator norm)
    pub d_pi_sq: f64,
    /// `||Phi F' Phi||^2` (operator norm)
    pub phi_df_phi_sq: f64,
}

impl LaplacianTerms {
    pub fn from_frame(fr: &BundleFrame) -> Self {
        let dfa = fr.df.adjoint();
        let a = &fr.gram_inv * &fr.df;
        let phi = trace_product(&(&a * &fr.pi), &dfa).re;
        let first = trace_product(&(fr.phi.adjoint() * &dfa * &a), &fr.phi).re;
        let second = trace_product(&(&a * &fr.pi * &dfa), &fr.gram_inv).re;
        Self {
            phi,
            lambda: first - second,
            d_pi_sq: op_norm_sq(&fr.d_pi()),
            phi_df_phi_sq: op_norm_sq(&fr.phi_df_phi()),
        }
    }

    pub fn psi(&self, delta_sq: f64) -> f64 {
        self.lambda + self.phi / delta_sq
    }
}

fn frame(f: &MatPoly, z: &[Complex64], var: usize) -> Result<BundleFrame> {
    if var >= f.nvars() {
        return Err(CoronaError::VariableOutOfRange { var, nvars: f.nvars() });
    }
    BundleFrame::at(f, &f.dz(var)?, z)
}

/// `dd̄_var phi = tr[(FF*)^-1 F' Pi (F')*]` with `F' = dF/dz_var`.
pub fn laplacian_phi(f: &MatPoly, z: &[Complex64], var: usize) -> Result<f64> {
    Ok(LaplacianTerms::from_frame(&frame(f, z, var)?).phi)
}

/// `dd̄_var lambda` in closed form.
pub fn laplacian_lambda(f: &MatPoly, z: &[Complex64], var: usize) -> Result<f64> {
    Ok(LaplacianTerms::from_frame(&frame(f, z, var)?).lambda)
}

/// `dd̄_var psi = dd̄ lambda + dd̄ phi / delta^2`.
pub fn laplacian_psi(f: &MatPoly, delta_sq: f64, z: &[Complex64], var: usize) -> Result<f64> {
    Ok(LaplacianTerms::from_frame(&frame(f, z, var)?).psi(delta_sq))
}

/// Five-point Laplacian in variable `var`, divided by 4.
pub fn fd_normalized_laplacian(u: &dyn Fn(&[Complex64]) -> Result<f64>, z: &[Complex64], var: usize, h: f64) -> Result<f64> {
    let at = |d: Complex64| {
        let mut w = z.to_vec();
        w[var] += d;
        u(&w)
    };
    let c = u(z)?;
    let sum = at(Complex64::new(h, 0.0))? + at(Complex64::new(-h, 0.0))? + at(Complex64::new(0.0, h))? + at(Complex64::new(0.0, -h))?;
    Ok((sum - 4.0 * c) / (4.0 * h * h))
}

/// Five-point Laplacian at steps `h` and `h / 2` combined by Richardson
/// extrapolation, removing the `O(h^2)` term.
pub fn fd_normalized_laplacian_richardson(u: &dyn Fn(&[Complex64]) -> Result<f64>, z: &[Complex64], var: usize, h: f64) -> Result<f64> {
    let coarse = fd_normalized_laplacian(u, z, var, h)?;
    let fine = fd_normalized_laplacian(u, z, var, h / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Largest deviation between the closed-form Laplacians of `phi` and
/// `lambda` and their extrapolated five-point differences over `points`, in every variable.
pub fn laplacian_fd_residual(f: &MatPoly, delta_sq: f64, points: &[Vec<Complex64>], h: f64) -> Result<f64> {
    let res: Vec<Result<f64>> = points
        .par_iter()
        .map(|z| {
            let mut worst = 0.0f64;
            for var in 0..f.nvars() {
                let terms = LaplacianTerms::from_frame(&frame(f, z, var)?);
                let fd_phi = fd_normalized_laplacian_richardson(&|w| Ok(potentials_at(f, delta_sq, w)?.0), z, var, h)?;
                let fd_lambda = fd_normalized_laplacian_richardson(&|w| Ok(potentials_at(f, delta_sq, w)?.1), z, var, h)?;
                worst = worst.max((fd_phi - terms.phi).abs()).max((fd_lambda - terms.lambda).abs());
            }
            Ok(worst)
        })
        .collect();
    res.into_iter().try_fold(0.0f64, |acc, r| Ok(acc.max(r?)))
}

/// Grid sweep of the potentials and their Laplacian lower bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialReport {
    pub k: f64,
    pub l: f64,
    pub min_phi: f64,
    pub max_phi: f64,
    pub min_psi: f64,
    pub max_psi: f64,
    /// Minimum over the grid and variables of `dd̄ phi - ||d Pi||^2`.
    pub worst_gap_phi: f64,
    /// Minimum over the grid and variables of `dd̄ psi - ||Phi F' Phi||^2`.
    pub worst_gap_psi: f64,
    /// Whether `delta^2 <= 1/e`; otherwise the report is informational.
    pub hypothesis_holds: bool,
    pub points: usize,
}

impl PotentialReport {
    pub fn passed(&self) -> bool {
        self.worst_gap_phi >= -POTENTIAL_TOL
            && self.worst_gap_psi >= -POTENTIAL_TOL
            && self.min_phi >= -POTENTIAL_TOL
            && self.max_phi <= self.k + POTENTIAL_TOL
            && self.min_psi >= -POTENTIAL_TOL
            && self.max_psi <= self.l + POTENTIAL_TOL
    }
}

/// Sweeps the closed polydisk (`grid_density` angles, `grid_density / 2`
/// radii and the centre per variable) and records extrema and Laplacian gaps.
pub fn verify_potentials(instance: &CoronaInstance, grid_density: usize) -> Result<PotentialReport> {
    let f = &instance.f;
    let ds = instance.delta_sq;
    let points = polydisk_samples(&disk_samples(grid_density.max(2)), f.nvars());
    let derivs: Vec<MatPoly> = (0..f.nvars()).map(|v| f.dz(v)).collect::<Result<_>>()?;
    let rows: Vec<Result<[f64; 4]>> = points
        .par_iter()
        .map(|z| {
            let (phi, _, psi) = potentials_at(f, ds, z)?;
            let mut gap_phi = f64::INFINITY;
            let mut gap_psi = f64::INFINITY;
            for df in &derivs {
                let t = LaplacianTerms::from_frame(&BundleFrame::at(f, df, z)?);
                gap_phi = gap_phi.min(t.phi - t.d_pi_sq);
                gap_psi = gap_psi.min(t.psi(ds) - t.phi_df_phi_sq);
            }
            Ok([phi, psi, gap_phi, gap_psi])
        })
        .collect();
    let mut rep = PotentialReport {
        k: k_bound(f.rows(), ds),
        l: l_bound(f.rows(), ds),
        min_phi: f64::INFINITY,
        max_phi: f64::NEG_INFINITY,
        min_psi: f64::INFINITY,
        max_psi: f64::NEG_INFINITY,
        worst_gap_phi: f64::INFINITY,
        worst_gap_psi: f64::INFINITY,
        hypothesis_holds: instance.hypothesis_holds(),
        points: points.len(),
    };
    for r in rows {
        let [phi, psi, gphi, gpsi] = r?;
        rep.min_phi = rep.min_phi.min(phi);
        rep.max_phi = rep.max_phi.max(phi);
        rep.min_psi = rep.min_psi.min(psi);
        rep.max_psi = rep.max_psi.max(psi);
        rep.worst_gap_phi = rep.worst_gap_phi.min(gphi);
        rep.worst_gap_psi = rep.worst_gap_psi.min(gpsi);
    }
    Ok(rep)
}
