//! Pointwise corona algebra: the Gram matrix `FF*`, the right inverse
//! `Phi = F*(FF*)^-1`, the kernel projection `Pi = I - F*(FF*)^-1 F`, the
//! estimate of `delta^2 <= lambda_min(FF*)` over the closed polydisk, and
//! finite-difference checks of the derivative identities for `Pi` and `Phi`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CoronaError, Result};
use crate::linalg::{frob_dist, hermitian_extremes, hpd_inverse};
use crate::matpoly::MatPoly;
use crate::CMat;

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// A full corona problem: `F` (r x m), right-hand side `g` (r x 1), a
/// certified `delta^2` with `delta^2 I <= FF* <= I`, and the exponent `p`.
#[derive(Clone, Debug)]
pub struct CoronaInstance {
    pub name: String,
    pub f: MatPoly,
    pub g: MatPoly,
    pub delta_sq: f64,
    /// `1 <= p <= inf`; `f64::INFINITY` stands for `p = inf`.
    pub p: f64,
}

impl CoronaInstance {
    pub fn new(name: impl Into<String>, f: MatPoly, g: MatPoly, delta_sq: f64, p: f64) -> Result<Self> {
        if g.cols() != 1 || g.rows() != f.rows() || g.nvars() != f.nvars() {
            return Err(CoronaError::Dimension(format!(
                "g must be {}x1 in {} variable(s), got {}x{} in {}",
                f.rows(),
                f.nvars(),
                g.rows(),
                g.cols(),
                g.nvars()
            )));
        }
        if !(delta_sq > 0.0 && delta_sq <= 1.0) {
            return Err(CoronaError::InvalidArgument(format!("delta^2 = {delta_sq} outside (0, 1]")));
        }
        if !(p >= 1.0) {
            return Err(CoronaError::InvalidArgument(format!("p = {p} below 1")));
        }
        Ok(Self { name: name.into(), f, g, delta_sq, p })
    }

    pub fn rows(&self) -> usize {
        self.f.rows()
    }

    pub fn cols(&self) -> usize {
        self.f.cols()
    }

    pub fn nvars(&self) -> usize {
        self.f.nvars()
    }

    pub fn delta(&self) -> f64 {
        self.delta_sq.sqrt()
    }

    /// Whether `delta^2 <= 1/e`, the standing hypothesis of the bounds.
    pub fn hypothesis_holds(&self) -> bool {
        self.delta_sq <= (-1.0f64).exp()
    }
}

/// `F(z) F(z)*`.
pub fn gram(f: &MatPoly, z: &[Complex64]) -> Result<CMat> {
    let v = f.eval(z)?;
    Ok(&v * v.adjoint())
}

/// Everything the identities need at one point, with `F'` taken in one
/// variable.
#[derive(Clone, Debug)]
pub struct BundleFrame {
    /// `F(z)`, r x m.
    pub f: CMat,
    /// `dF/dz_var (z)`, r x m.
    pub df: CMat,
    pub gram: CMat,
    pub gram_inv: CMat,
    /// `Phi(z)`, m x r.
    pub phi: CMat,
    /// `Pi(z)`, m x m.
    pub pi: CMat,
}

impl BundleFrame {
    pub fn at(f: &MatPoly, df: &MatPoly, z: &[Complex64]) -> Result<Self> {
        let fv = f.eval(z)?;
        let dfv = df.eval(z)?;
        Self::from_values(fv, dfv)
    }

    pub fn from_values(f: CMat, df: CMat) -> Result<Self> {
        let gram = &f * f.adjoint();
        let gram_inv = hpd_inverse(&gram)?;
        let phi = f.adjoint() * &gram_inv;
        let pi = CMat::identity(f.ncols(), f.ncols()) - &phi * &f;
        Ok(Self { f, df, gram, gram_inv, phi, pi })
    }

    /// `d Pi = -Phi F' Pi`.
    pub fn d_pi(&self) -> CMat {
        -(&self.phi * &self.df * &self.pi)
    }

    /// `dbar Pi = (d Pi)*`.
    pub fn dbar_pi(&self) -> CMat {
        self.d_pi().adjoint()
    }

    /// `dbar Phi = Pi (F')* (FF*)^-1`.
    pub fn dbar_phi(&self) -> CMat {
        &self.pi * self.df.adjoint() * &self.gram_inv
    }

    /// `Phi F' Phi`.
    pub fn phi_df_phi(&self) -> CMat {
        &self.phi * &self.df * &self.phi
    }

    /// `d dbar Phi = d Pi dbar Phi + (d Pi)* Phi F' Phi`.
    pub fn ddbar_phi(&self) -> CMat {
        let dpi = self.d_pi();
        &dpi * self.dbar_phi() + dpi.adjoint() * self.phi_df_phi()
    }

    /// The intermediate form `d Pi (F')* (FF*)^-1 - (dbar Phi) F' Phi`.
    pub fn ddbar_phi_expanded(&self) -> CMat {
        self.d_pi() * self.df.adjoint() * &self.gram_inv - self.dbar_phi() * &self.df * &self.phi
    }
}

/// Rejects points where `lambda_min(FF*) < delta_sq / 2`.
fn guarded_gram(f: &MatPoly, delta_sq: f64, z: &[Complex64]) -> Result<CMat> {
    let g = gram(f, z)?;
    let (lo, _) = hermitian_extremes(&g);
    let guard = delta_sq / 2.0;
    if lo < guard {
        return Err(CoronaError::NearSingular { lambda_min: lo, guard });
    }
    Ok(g)
}

/// `Phi(z) = F(z)* (F(z)F(z)*)^-1`, with the guard `lambda_min >= delta_sq / 2`.
pub fn phi_map(f: &MatPoly, delta_sq: f64, z: &[Complex64]) -> Result<CMat> {
    let g = guarded_gram(f, delta_sq, z)?;
    Ok(f.adjoint_eval(z)? * hpd_inverse(&g)?)
}

/// `Pi(z) = I - F(z)* (F(z)F(z)*)^-1 F(z)`, the projection onto `ker F(z)`.
pub fn pi_map(f: &MatPoly, delta_sq: f64, z: &[Complex64]) -> Result<CMat> {
    let fv = f.eval(z)?;
    let g = guarded_gram(f, delta_sq, z)?;
    let m = f.cols();
    Ok(CMat::identity(m, m) - fv.adjoint() * hpd_inverse(&g)? * fv)
}

/// Sample points of the closed disk used for grid sweeps: the centre plus
/// `density / 2` radii in `(0, 1]` times `density` angles.
pub fn disk_samples(density: usize) -> Vec<Complex64> {
    let radial = (density / 2).max(1);
    let mut pts = Vec::with_capacity(radial * density + 1);
    pts.push(Complex64::new(0.0, 0.0));
    for i in 1..=radial {
        let r = i as f64 / radial as f64;
        for k in 0..density {
            // stagger alternate rings so angles do not line up radially
            let shift = if i % 2 == 0 { 0.5 } else { 0.0 };
            let t = std::f64::consts::TAU * (k as f64 + shift) / density as f64;
            pts.push(Complex64::from_polar(r, t));
        }
    }
    pts
}

/// Cartesian product of per-variable samples.
pub fn polydisk_samples(per_var: &[Complex64], nvars: usize) -> Vec<Vec<Complex64>> {
    let mut out: Vec<Vec<Complex64>> = vec![Vec::new()];
    for _ in 0..nvars {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                per_var.iter().map(move |&z| {
                    let mut p = prefix.clone();
                    p.push(z);
                    p
                })
            })
            .collect();
    }
    out
}

/// Grid estimates of `min lambda_min(FF*)` and `max lambda_max(FF*)` over the
/// closed polydisk, with the points where they were found.
#[derive(Clone, Debug)]
pub struct DeltaRange {
    pub delta_sq_est: f64,
    pub sup_sq_est: f64,
    pub argmin: Vec<Complex64>,
    pub argmax: Vec<Complex64>,
    /// Final per-variable grid density after refinement.
    pub density: usize,
}

const DELTA_POINT_BUDGET: usize = 250_000;

fn extremes_at(f: &MatPoly, z: &[Complex64]) -> (f64, f64) {
    match gram(f, z) {
        Ok(g) => hermitian_extremes(&g),
        Err(_) => (f64::NAN, f64::NAN),
    }
}

fn clamp_to_polydisk(z: &mut [Complex64]) {
    for zj in z.iter_mut() {
        let r = zj.norm();
        if r > 1.0 {
            *zj /= r;
        }
    }
}

/// Compass search on the closed polydisk starting from `start`, minimising
/// `objective`.
fn polish(objective: &dyn Fn(&[Complex64]) -> f64, start: &[Complex64], step0: f64) -> (f64, Vec<Complex64>) {
    let mut best = start.to_vec();
    let mut best_val = objective(&best);
    let mut step = step0;
    let dirs = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)];
    while step > 1e-10 {
        let mut improved = false;
        for j in 0..best.len() {
            for d in dirs {
                let mut cand = best.clone();
                cand[j] += d * step;
                clamp_to_polydisk(&mut cand);
                let v = objective(&cand);
                if v < best_val {
                    best_val = v;
                    best = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best_val, best)
}

fn sweep(f: &MatPoly, density: usize) -> DeltaRange {
    let samples = polydisk_samples(&disk_samples(density), f.nvars());
    let vals: Vec<(f64, f64)> = samples.par_iter().map(|z| extremes_at(f, z)).collect();
    let (mut imin, mut imax) = (0, 0);
    for (i, &(lo, hi)) in vals.iter().enumerate() {
        if lo < vals[imin].0 {
            imin = i;
        }
        if hi > vals[imax].1 {
            imax = i;
        }
    }
    let step = 1.0 / density as f64;
    let (lo, argmin) = polish(&|z| extremes_at(f, z).0, &samples[imin], step);
    let (neg_hi, argmax) = polish(&|z| -extremes_at(f, z).1, &samples[imax], step);
    DeltaRange { delta_sq_est: lo, sup_sq_est: -neg_hi, argmin, argmax, density }
}

/// Estimates `(delta^2, sup)` with `delta^2 = min lambda_min(FF*)` and
/// `sup = max lambda_max(FF*)` over the closed polydisk.
///
/// The grid (interior and boundary samples) is doubled until both estimates
/// move by less than `1e-4` relative, or the point budget is exhausted; each
/// grid optimum is polished by a compass search. The minimum need not sit on
/// the torus, hence the interior samples.
pub fn delta_range(f: &MatPoly, grid_density: usize) -> Result<DeltaRange> {
    if grid_density < 8 {
        return Err(CoronaError::InvalidArgument(format!("grid density {grid_density} below 8")));
    }
    let points = |d: usize| ((d / 2) * d + 1).pow(f.nvars() as u32);
    let mut density = grid_density;
    let mut est = sweep(f, density);
    loop {
        let next = density * 2;
        if points(next) > DELTA_POINT_BUDGET {
            break;
        }
        let refined = sweep(f, next);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        let settled = rel(refined.delta_sq_est, est.delta_sq_est) < 1e-4 && rel(refined.sup_sq_est, est.sup_sq_est) < 1e-4;
        if refined.delta_sq_est <= est.delta_sq_est {
            est.delta_sq_est = refined.delta_sq_est;
            est.argmin = refined.argmin;
        }
        if refined.sup_sq_est >= est.sup_sq_est {
            est.sup_sq_est = refined.sup_sq_est;
            est.argmax = refined.argmax;
        }
        density = next;
        est.density = density;
        if settled {
            break;
        }
    }
    if !(est.delta_sq_est >= 1e-12) {
        return Err(CoronaError::CoronaCondition {
            lambda_min: est.delta_sq_est,
            point: format!("{:?}", est.argmin),
        });
    }
    Ok(est)
}

/// Maximum residuals of the derivative identities for `Pi` and `Phi`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IdentityResidualReport {
    /// `d Pi = -F*(FF*)^-1 F' Pi`
    pub d_pi: f64,
    /// `dbar Phi = Pi (F')* (FF*)^-1`
    pub dbar_phi: f64,
    /// `d dbar Phi = d Pi dbar Phi + (d Pi)* Phi F' Phi`, also against the
    /// expanded intermediate form
    pub ddbar_phi: f64,
    /// `Pi d Pi = 0`
    pub pi_d_pi: f64,
    /// `(d Pi) Pi = d Pi`
    pub d_pi_pi: f64,
    /// `(dbar Pi) Pi = 0`
    pub dbar_pi_pi: f64,
    /// `Pi dbar Pi = dbar Pi`
    pub pi_dbar_pi: f64,
    pub points: usize,
    pub step: f64,
}

impl IdentityResidualReport {
    pub fn max_residual(&self) -> f64 {
        [self.d_pi, self.dbar_phi, self.ddbar_phi, self.pi_d_pi, self.d_pi_pi, self.dbar_pi_pi, self.pi_dbar_pi]
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Entrywise maximum of two reports.
    pub fn merge(&self, other: &Self) -> Self {
        Self {
            d_pi: self.d_pi.max(other.d_pi),
            dbar_phi: self.dbar_phi.max(other.dbar_phi),
            ddbar_phi: self.ddbar_phi.max(other.ddbar_phi),
            pi_d_pi: self.pi_d_pi.max(other.pi_d_pi),
            d_pi_pi: self.d_pi_pi.max(other.d_pi_pi),
            dbar_pi_pi: self.dbar_pi_pi.max(other.dbar_pi_pi),
            pi_dbar_pi: self.pi_dbar_pi.max(other.pi_dbar_pi),
            points: self.points + other.points,
            step: self.step.max(other.step),
        }
    }
}

/// Wirtinger derivatives `(d, dbar)` of a matrix field by the fourth-order
/// five-point central stencil in the real and imaginary directions of
/// variable `var`.
fn wirtinger_fd<Fm>(field: Fm, z: &[Complex64], var: usize, h: f64) -> Result<(CMat, CMat)>
where
    Fm: Fn(&[Complex64]) -> Result<CMat>,
{
    let shifted = |d: Complex64| {
        let mut w = z.to_vec();
        w[var] += d;
        field(&w)
    };
    let stencil = |dir: Complex64| -> Result<CMat> {
        let near = shifted(dir * h)? - shifted(-dir * h)?;
        let far = shifted(dir * (2.0 * h))? - shifted(-dir * (2.0 * h))?;
        Ok((near * Complex64::new(8.0, 0.0) - far) / Complex64::new(12.0 * h, 0.0))
    };
    let dx = stencil(Complex64::new(1.0, 0.0))?;
    let dy = stencil(Complex64::new(0.0, 1.0))?;
    let i = Complex64::new(0.0, 1.0);
    let half = Complex64::new(0.5, 0.0);
    let d = (&dx - &dy * i) * half;
    let dbar = (dx + dy * i) * half;
    Ok((d, dbar))
}

/// Checks the derivative identities for `Pi` and `Phi` at `z`, differentiating
/// in variable `var` with the other coordinates frozen.
///
/// `d Pi`, `dbar Pi` and `dbar Phi` come from five-point differences of the
/// pointwise maps. `d dbar Phi` is the central-difference `d` of the
/// closed-form `dbar Phi` field (itself checked against differences of `Phi`),
/// because a second difference at step `1e-5` loses all accuracy to rounding.
pub fn check_identities(f: &MatPoly, z: &[Complex64], var: usize, h_step: f64) -> Result<IdentityResidualReport> {
    if h_step < 1e-9 {
        return Err(CoronaError::StepUnderflow(h_step));
    }
    if var >= f.nvars() || z.len() != f.nvars() {
        return Err(CoronaError::VariableOutOfRange { var, nvars: f.nvars() });
    }
    if z[var].norm() > 1.0 - 3.0 * h_step {
        return Err(CoronaError::InvalidArgument(format!(
            "point |z_{var}| = {} is not interior for step {h_step}",
            z[var].norm()
        )));
    }
    let df = f.dz(var)?;
    let frame = BundleFrame::at(f, &df, z)?;
    let frame_at = |w: &[Complex64]| BundleFrame::at(f, &df, w);

    let (d_pi_fd, dbar_pi_fd) = wirtinger_fd(|w| Ok(frame_at(w)?.pi), z, var, h_step)?;
    let (_, dbar_phi_fd) = wirtinger_fd(|w| Ok(frame_at(w)?.phi), z, var, h_step)?;
    let (ddbar_phi_fd, _) = wirtinger_fd(|w| Ok(frame_at(w)?.dbar_phi()), z, var, h_step)?;

    let pi = &frame.pi;
    let ddbar = frame.ddbar_phi();
    Ok(IdentityResidualReport {
        d_pi: frob_dist(&d_pi_fd, &frame.d_pi()),
        dbar_phi: frob_dist(&dbar_phi_fd, &frame.dbar_phi()),
        ddbar_phi: frob_dist(&ddbar_phi_fd, &ddbar).max(frob_dist(&frame.ddbar_phi_expanded(), &ddbar)),
        pi_d_pi: (pi * &d_pi_fd).norm(),
        d_pi_pi: frob_dist(&(&d_pi_fd * pi), &d_pi_fd),
        dbar_pi_pi: (&dbar_pi_fd * pi).norm(),
        pi_dbar_pi: frob_dist(&(pi * &dbar_pi_fd), &dbar_pi_fd),
        points: 1,
        step: h_step,
    })
}

/// Interior sample grid `radial x angular` in the disk of radius `r_max`.
pub fn interior_grid(radial: usize, angular: usize, r_max: f64) -> Vec<Complex64> {
    let mut pts = Vec::with_capacity(radial * angular);
    for i in 0..radial {
        let r = r_max * (i as f64 + 0.5) / radial as f64;
        for k in 0..angular {
            pts.push(Complex64::from_polar(r, std::f64::consts::TAU * (k as f64 + 0.25) / angular as f64));
        }
    }
    pts
}

/// Runs [`check_identities`] on an interior `side x side` grid in every
/// variable (other coordinates frozen at the same grid point) and returns the
/// entrywise maxima.
pub fn check_identities_on_grid(f: &MatPoly, side: usize, h_step: f64) -> Result<IdentityResidualReport> {
    let r_max = 1.0 - 4.0 * h_step.max(1e-3);
    let grid = interior_grid(side, side, r_max);
    let n = f.nvars();
    let reports: Vec<Result<IdentityResidualReport>> = grid
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, &z0)| {
            (0..n).map(move |var| {
                // spread the frozen coordinates over the grid as well
                let z: Vec<Complex64> = (0..n).map(|j| if j == var { z0 } else { grid_partner(z0, j, i) }).collect();
                check_identities(f, &z, var, h_step)
            })
        })
        .collect();
    let mut acc = IdentityResidualReport { step: h_step, ..Default::default() };
    for r in reports {
        acc = acc.merge(&r?);
    }
    Ok(acc)
}

fn grid_partner(z0: Complex64, j: usize, i: usize) -> Complex64 {
    let t = (i as f64 * 0.618_033_988_75 + j as f64 * 0.414_213_562) % 1.0;
    z0 * Complex64::from_polar(1.0, std::f64::consts::TAU * t)
}
