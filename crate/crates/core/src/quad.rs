//! Quadrature for `dmu = (2/pi) log(1/|z|) dx dy` on the disk and `dm` on the
//! circle, Green's formula and Littlewood-Paley checks, Carleson embedding
//! ratios, and the dual functional `L` with its three-term split.
//!
//! In polar coordinates `dmu = 4 r log(1/r) dr dtheta/(2 pi)`, and with
//! `x = r^2` the radial factor becomes `log(1/x) dx` on `[0, 1]`. The radial
//! nodes are therefore a Gauss rule for the logarithmic weight, exact for
//! polynomials in `|z|^2` of degree below `2 * radial_count`.

use std::ops::Add;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CoronaError, Result};
use crate::linalg::pairwise_sum;
use crate::matpoly::{MatPoly, MultiIndex};
use crate::pointwise::{BundleFrame, CoronaInstance};
use crate::potential::k_bound;
use crate::CMat;

/// `C = sqrt(1 + e^2) + sqrt(e) + sqrt(2) e`.
pub fn corona_constant() -> f64 {
    let e = std::f64::consts::E;
    (1.0 + e * e).sqrt() + e.sqrt() + std::f64::consts::SQRT_2 * e
}

/// The older constant `2 sqrt(2) e + 2 sqrt(e)` for the same estimate.
pub fn trent_constant() -> f64 {
    let e = std::f64::consts::E;
    2.0 * std::f64::consts::SQRT_2 * e + 2.0 * e.sqrt()
}

/// `C(r, delta) = C / delta^(r+1) * log(1/delta^(2r))`.
pub fn functional_bound(r: usize, delta_sq: f64) -> f64 {
    corona_constant() / delta_sq.sqrt().powi(r as i32 + 1) * k_bound(r, delta_sq)
}

/// Gauss rule for `int_0^1 u(x) log(1/x) dx` with `n` nodes.
///
/// Recurrence coefficients come from the modified Chebyshev algorithm with
/// modified moments against monic shifted Legendre polynomials (scaled by
/// `4^k` to stay in range), nodes and weights from the Jacobi matrix.
pub fn gauss_log_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let big = 2 * n;
    // monic shifted Legendre: p_{k+1} = (x - 1/2) p_k - b_k p_{k-1}
    let a = 0.5;
    let b: Vec<f64> = (0..big).map(|k| if k == 0 { 0.0 } else { let k = k as f64; k * k / (4.0 * (4.0 * k * k - 1.0)) }).collect();
    // 4^l int p_l log(1/x) dx = (-1)^l / (l (l+1)) * 4^l / binom(2l, l)
    let mut moments = vec![0.0; big];
    moments[0] = 1.0;
    let mut ratio = 1.0;
    for (l, m) in moments.iter_mut().enumerate().skip(1) {
        let lf = l as f64;
        ratio *= 2.0 * lf / (2.0 * lf - 1.0);
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        *m = sign / (lf * (lf + 1.0)) * ratio;
    }
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    alpha[0] = a + moments[1] / moments[0] / 4.0;
    beta[0] = moments[0];
    let mut prev2 = vec![0.0; big];
    let mut prev1 = moments;
    for k in 1..n {
        let mut cur = vec![0.0; big];
        for l in k..(big - k) {
            cur[l] = prev1[l + 1] - 4.0 * (alpha[k - 1] - a) * prev1[l] - 16.0 * beta[k - 1] * prev2[l] + 16.0 * b[l] * prev1[l - 1];
        }
        alpha[k] = a + (cur[k + 1] / cur[k] - prev1[k] / prev1[k - 1]) / 4.0;
        beta[k] = cur[k] / prev1[k - 1] / 16.0;
        prev2 = std::mem::replace(&mut prev1, cur);
    }
    let jac = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[j].sqrt()
        } else if j + 1 == i {
            beta[i].sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n).map(|j| (eig.eigenvalues[j], beta[0] * eig.eigenvectors[(0, j)].powi(2))).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs.into_iter().unzip()
}

/// Product rule for `dmu` on the disk plus equispaced nodes for `dm`.
#[derive(Clone, Debug)]
pub struct DiskQuadrature {
    pub nodes: Vec<Complex64>,
    pub weights: Vec<f64>,
    pub circle_nodes: Vec<Complex64>,
    pub radial_count: usize,
    pub angular_count: usize,
}

impl DiskQuadrature {
    pub fn new(radial_count: usize, angular_count: usize) -> Result<Self> {
        if radial_count < 16 || angular_count < 32 {
            return Err(CoronaError::InvalidArgument(format!(
                "quadrature needs at least 16 radial and 32 angular nodes, got {radial_count} x {angular_count}"
            )));
        }
        let (xs, ws) = gauss_log_rule(radial_count);
        let angles: Vec<Complex64> = (0..angular_count)
            .map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / angular_count as f64))
            .collect();
        let mut nodes = Vec::with_capacity(radial_count * angular_count);
        let mut weights = Vec::with_capacity(radial_count * angular_count);
        for (x, w) in xs.iter().zip(&ws) {
            for u in &angles {
                nodes.push(u * x.sqrt());
                weights.push(w / angular_count as f64);
            }
        }
        Ok(Self { nodes, weights, circle_nodes: angles, radial_count, angular_count })
    }

    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// `int_D f dmu`.
    pub fn integrate_disk<T, Fn1>(&self, f: Fn1) -> T
    where
        T: Copy + Default + Add<Output = T> + Send + std::ops::Mul<f64, Output = T>,
        Fn1: Fn(Complex64) -> T + Sync,
    {
        let terms: Vec<T> = self.nodes.par_iter().zip(&self.weights).map(|(&z, &w)| f(z) * w).collect();
        pairwise_sum(&terms)
    }

    /// `int_T f dm`.
    pub fn integrate_circle<T, Fn1>(&self, f: Fn1) -> T
    where
        T: Copy + Default + Add<Output = T> + Send + std::ops::Mul<f64, Output = T>,
        Fn1: Fn(Complex64) -> T + Sync,
    {
        let w = 1.0 / self.circle_nodes.len() as f64;
        let terms: Vec<T> = self.circle_nodes.par_iter().map(|&z| f(z) * w).collect();
        pairwise_sum(&terms)
    }

    /// Fallible variant of [`Self::integrate_disk`].
    pub fn try_integrate_disk<T, Fn1>(&self, f: Fn1) -> Result<T>
    where
        T: Copy + Default + Add<Output = T> + Send + std::ops::Mul<f64, Output = T>,
        Fn1: Fn(Complex64) -> Result<T> + Sync,
    {
        let terms: Vec<T> = self.nodes.par_iter().zip(&self.weights).map(|(&z, &w)| Ok(f(z)? * w)).collect::<Result<_>>()?;
        Ok(pairwise_sum(&terms))
    }

    /// Fallible variant of [`Self::integrate_circle`].
    pub fn try_integrate_circle<T, Fn1>(&self, f: Fn1) -> Result<T>
    where
        T: Copy + Default + Add<Output = T> + Send + std::ops::Mul<f64, Output = T>,
        Fn1: Fn(Complex64) -> Result<T> + Sync,
    {
        let w = 1.0 / self.circle_nodes.len() as f64;
        let terms: Vec<T> = self.circle_nodes.par_iter().map(|&z| Ok(f(z)? * w)).collect::<Result<_>>()?;
        Ok(pairwise_sum(&terms))
    }
}

/// Same as [`DiskQuadrature::new`].
pub fn make_quadrature(radial_count: usize, angular_count: usize) -> Result<DiskQuadrature> {
    DiskQuadrature::new(radial_count, angular_count)
}

/// `|int_T u dm - u(0) - int_D dd̄u dmu|`.
pub fn green_residual(u: &(dyn Fn(Complex64) -> f64 + Sync), lap_u: &(dyn Fn(Complex64) -> f64 + Sync), q: &DiskQuadrature) -> f64 {
    let boundary: f64 = q.integrate_circle(u);
    let area: f64 = q.integrate_disk(lap_u);
    (boundary - u(Complex64::new(0.0, 0.0)) - area).abs()
}

fn column_norm_sq(v: &CMat) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

fn check_one_var(p: &MatPoly, what: &str) -> Result<()> {
    if p.nvars() != 1 {
        return Err(CoronaError::InvalidArgument(format!("{what} needs one variable, got {}", p.nvars())));
    }
    Ok(())
}

/// `|int_D ||g'||^2 dmu - (||g||_2^2 - ||g(0)||^2)|` for a one-variable
/// column `g`.
pub fn littlewood_paley_residual(g: &MatPoly, q: &DiskQuadrature) -> Result<f64> {
    check_one_var(g, "Littlewood-Paley check")?;
    let dg = g.dz(0)?;
    let area: f64 = q.try_integrate_disk(|z| Ok(column_norm_sq(&dg.eval(&[z])?)))?;
    let boundary: f64 = q.try_integrate_circle(|z| Ok(column_norm_sq(&g.eval(&[z])?)))?;
    let at0 = column_norm_sq(&g.eval(&[Complex64::new(0.0, 0.0)])?);
    Ok((area - (boundary - at0)).abs())
}

/// A ratio checked against a bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmbeddingReport {
    pub ratio: f64,
    pub bound: f64,
    pub passed: bool,
}

impl EmbeddingReport {
    pub fn new(ratio: f64, bound: f64, slack: f64) -> Self {
        Self { ratio, bound, passed: ratio <= bound + slack }
    }
}

/// Slack on embedding ratios.
pub const EMBEDDING_TOL: f64 = 1e-6;

/// `int_D dd̄phi ||f||^2 dmu / (||phi||_inf ||f||_2^2)` against `e`, for an
/// analytic column `f` in one variable and a subharmonic `phi` with the given
/// sup norm.
pub fn carleson_ratio(lap_phi: &(dyn Fn(Complex64) -> Result<f64> + Sync), phi_sup: f64, f: &MatPoly, q: &DiskQuadrature) -> Result<EmbeddingReport> {
    check_one_var(f, "Carleson ratio")?;
    if !(phi_sup > 0.0) {
        return Err(CoronaError::InvalidArgument(format!("||phi||_inf = {phi_sup} must be positive")));
    }
    let f_norm: f64 = q.try_integrate_circle(|z| Ok(column_norm_sq(&f.eval(&[z])?)))?;
    if f_norm == 0.0 {
        return Err(CoronaError::InvalidArgument("f vanishes".into()));
    }
    let area: f64 = q.try_integrate_disk(|z| Ok(lap_phi(z)? * column_norm_sq(&f.eval(&[z])?)))?;
    Ok(EmbeddingReport::new(area / (phi_sup * f_norm), std::f64::consts::E, EMBEDDING_TOL))
}

/// An anti-analytic vector polynomial `h(z) = sum_a c_a conj(z)^a`, stored
/// through the analytic polynomial `H` with `h(z) = H(conj z)`.
#[derive(Clone, Debug)]
pub struct AntiAnalytic {
    pub poly: MatPoly,
}

impl AntiAnalytic {
    /// Requires a column with no constant term.
    pub fn new(poly: MatPoly) -> Result<Self> {
        if poly.cols() != 1 {
            return Err(CoronaError::Dimension(format!("h must be a column, got {} columns", poly.cols())));
        }
        if poly.coeff(&MultiIndex::zero(poly.nvars())).is_some_and(|c| c.norm() > 0.0) {
            return Err(CoronaError::InvalidArgument("h(0) must vanish".into()));
        }
        Ok(Self { poly })
    }

    /// Requires every term to contain every variable, so `h` vanishes when
    /// any single coordinate is zero.
    pub fn vanishing_on_axes(poly: MatPoly) -> Result<Self> {
        if poly.terms().any(|(idx, c)| c.norm() > 0.0 && idx.entries().contains(&0)) {
            return Err(CoronaError::InvalidArgument("h must vanish whenever one coordinate is zero".into()));
        }
        Self::new(poly)
    }

    pub fn eval(&self, z: &[Complex64]) -> Result<CMat> {
        let zc: Vec<Complex64> = z.iter().map(|w| w.conj()).collect();
        self.poly.eval(&zc)
    }

    /// `dbar_var h` at `z`.
    pub fn dbar(&self, var: usize, z: &[Complex64]) -> Result<CMat> {
        let zc: Vec<Complex64> = z.iter().map(|w| w.conj()).collect();
        self.poly.dz(var)?.eval(&zc)
    }
}

/// `Pi h`, `d Pi (Pi h)` and `dbar(Pi h) = (dbar Pi) h + Pi dbar h` at one
/// frame.
fn xi_parts(frame: &BundleFrame, h: &CMat, dbar_h: &CMat) -> (CMat, CMat, CMat) {
    let xi = &frame.pi * h;
    let d_pi_xi = frame.d_pi() * &xi;
    let dbar_xi = frame.dbar_pi() * h + &frame.pi * dbar_h;
    (xi, d_pi_xi, dbar_xi)
}

/// The two embedding checks for `xi = Pi h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XiEmbedding {
    /// `int dd̄phi ||xi||^2 dmu / ||xi||_2^2` against `e K e^K`.
    pub potential: EmbeddingReport,
    /// `int ||dbar xi||^2 dmu / ||xi||_2^2` against `1 + e K e^K`.
    pub gradient: EmbeddingReport,
    /// `int (||dbar xi||^2 - ||d Pi xi||^2) dmu / ||xi||_2^2`, which equals 1.
    pub green_identity: f64,
    pub xi_norm_sq: f64,
}

/// `||Pi h||_2^2` on the circle.
pub fn xi_norm_sq(instance: &CoronaInstance, h: &AntiAnalytic, q: &DiskQuadrature) -> Result<f64> {
    let f = &instance.f;
    let df = f.dz(0)?;
    q.try_integrate_circle(|z| {
        let fr = BundleFrame::at(f, &df, &[z])?;
        Ok(column_norm_sq(&(&fr.pi * h.eval(&[z])?)))
    })
}

/// Embedding checks for `xi = Pi h` with `phi` the log-determinant potential
/// and `K = r log(1/delta^2)`; `dbar xi` is formed in closed form.
pub fn xi_embedding_check(instance: &CoronaInstance, h: &AntiAnalytic, q: &DiskQuadrature) -> Result<XiEmbedding> {
    check_one_var(&instance.f, "xi embedding check")?;
    let f = &instance.f;
    let df = f.dz(0)?;
    let k = k_bound(instance.rows(), instance.delta_sq);
    let c1 = std::f64::consts::E * k * k.exp();
    let norm = xi_norm_sq(instance, h, q)?;
    if norm == 0.0 {
        return Err(CoronaError::InvalidArgument("xi = Pi h vanishes".into()));
    }
    let sums: [f64; 3] = {
        let terms: Vec<[f64; 3]> = q
            .nodes
            .par_iter()
            .zip(&q.weights)
            .map(|(&z, &w)| {
                let fr = BundleFrame::at(f, &df, &[z])?;
                let (xi, d_pi_xi, dbar_xi) = xi_parts(&fr, &h.eval(&[z])?, &h.dbar(0, &[z])?);
                let dfa = fr.df.adjoint();
                let lap_phi = crate::linalg::trace_product(&(&fr.gram_inv * &fr.df * &fr.pi), &dfa).re;
                let dbar_sq = column_norm_sq(&dbar_xi);
                Ok([w * lap_phi * column_norm_sq(&xi), w * dbar_sq, w * (dbar_sq - column_norm_sq(&d_pi_xi))])
            })
            .collect::<Result<_>>()?;
        let col = |i: usize| pairwise_sum(&terms.iter().map(|t| t[i]).collect::<Vec<_>>());
        [col(0), col(1), col(2)]
    };
    Ok(XiEmbedding {
        potential: EmbeddingReport::new(sums[0] / norm, c1, EMBEDDING_TOL),
        gradient: EmbeddingReport::new(sums[1] / norm, 1.0 + c1, EMBEDDING_TOL),
        green_identity: sums[2] / norm,
        xi_norm_sq: norm,
    })
}

/// `boundary = int_T <Phi g, h> dm` and the area terms
/// `I = int <Phi F' Phi g, (d Pi) xi> dmu`, `II = int <(dbar Phi) g', xi> dmu`,
/// `III = int <(dbar Phi) g, dbar xi> dmu` with `xi = Pi h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunctionalTerms {
    pub boundary: Complex64,
    pub i: Complex64,
    pub ii: Complex64,
    pub iii: Complex64,
}

impl FunctionalTerms {
    pub fn area(&self) -> Complex64 {
        self.i + self.ii + self.iii
    }

    pub fn agreement(&self) -> f64 {
        (self.boundary - self.area()).norm()
    }
}

/// `<a, b> = b* a` for columns.
fn inner(a: &CMat, b: &CMat) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

fn terms_at(f: &MatPoly, df: &MatPoly, g: &MatPoly, dg: &MatPoly, h: &AntiAnalytic, var: usize, z: &[Complex64]) -> Result<[Complex64; 3]> {
    let fr = BundleFrame::at(f, df, z)?;
    let gv = g.eval(z)?;
    let (xi, d_pi_xi, dbar_xi) = xi_parts(&fr, &h.eval(z)?, &h.dbar(var, z)?);
    let dbar_phi = fr.dbar_phi();
    Ok([
        inner(&(fr.phi_df_phi() * &gv), &d_pi_xi),
        inner(&(&dbar_phi * dg.eval(z)?), &xi),
        inner(&(&dbar_phi * &gv), &dbar_xi),
    ])
}

fn boundary_at(f: &MatPoly, g: &MatPoly, h: &AntiAnalytic, z: &[Complex64]) -> Result<Complex64> {
    let fr = BundleFrame::from_values(f.eval(z)?, CMat::zeros(f.rows(), f.cols()))?;
    Ok(inner(&(&fr.phi * g.eval(z)?), &h.eval(z)?))
}

/// Torus nodes of `T^count` with `nodes` points per variable.
fn torus_points(nodes: usize, count: usize) -> Vec<Vec<Complex64>> {
    let circle: Vec<Complex64> = (0..nodes).map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / nodes as f64)).collect();
    crate::pointwise::polydisk_samples(&circle, count)
}

/// [`FunctionalTerms`] for a one-variable instance.
pub fn functional_l(instance: &CoronaInstance, h: &AntiAnalytic, q: &DiskQuadrature) -> Result<FunctionalTerms> {
    check_one_var(&instance.f, "functional L")?;
    functional_l_in_var(instance, h, q, 0, q.angular_count)
}

/// The functional in variable `var` on the polydisk: the disk integral in
/// `z_var` of the three-term split, averaged over the torus in the remaining
/// variables sampled with `frozen_nodes` points each. The boundary term is
/// the full torus integral of `<Phi g, h>`.
pub fn functional_l_in_var(instance: &CoronaInstance, h: &AntiAnalytic, q: &DiskQuadrature, var: usize, frozen_nodes: usize) -> Result<FunctionalTerms> {
    let n = instance.nvars();
    if var >= n {
        return Err(CoronaError::VariableOutOfRange { var, nvars: n });
    }
    if h.poly.nvars() != n || h.poly.rows() != instance.cols() {
        return Err(CoronaError::Dimension(format!("h must be a {}-vector in {n} variable(s)", instance.cols())));
    }
    let (f, g) = (&instance.f, &instance.g);
    let (df, dg) = (f.dz(var)?, g.dz(var)?);
    let others = torus_points(frozen_nodes, n - 1);
    let place = |zj: Complex64, rest: &[Complex64]| {
        let mut z = rest.to_vec();
        z.insert(var, zj);
        z
    };
    let w_rest = 1.0 / others.len() as f64;
    let area_terms: Vec<[Complex64; 3]> = others
        .par_iter()
        .flat_map_iter(|rest| q.nodes.iter().zip(&q.weights).map(move |(&zj, &w)| (place(zj, rest), w * w_rest)))
        .map(|(z, w)| {
            let t = terms_at(f, &df, g, &dg, h, var, &z)?;
            Ok([t[0] * w, t[1] * w, t[2] * w])
        })
        .collect::<Result<_>>()?;
    let col = |i: usize| pairwise_sum(&area_terms.iter().map(|t| t[i]).collect::<Vec<_>>());
    let boundary_points = torus_points(q.angular_count, 1);
    let w_b = 1.0 / q.angular_count as f64;
    let boundary_terms: Vec<Complex64> = others
        .par_iter()
        .flat_map_iter(|rest| boundary_points.iter().map(move |zj| place(zj[0], rest)))
        .map(|z| Ok(boundary_at(f, g, h, &z)? * (w_b * w_rest)))
        .collect::<Result<_>>()?;
    Ok(FunctionalTerms { boundary: pairwise_sum(&boundary_terms), i: col(0), ii: col(1), iii: col(2) })
}

/// `|L(xi)|` against `C(r, delta) ||xi||_2 ||g||_2`.
pub fn functional_bound_report(instance: &CoronaInstance, terms: &FunctionalTerms, xi_norm: f64) -> EmbeddingReport {
    let g_norm = instance.g.coeff_norm();
    let bound = functional_bound(instance.rows(), instance.delta_sq);
    EmbeddingReport::new(terms.boundary.norm() / (xi_norm * g_norm), bound, 0.0)
}

/// Random anti-analytic column with terms of total degree `1..=degree` (or,
/// with `all_vars`, only terms containing every variable).
pub fn random_anti_analytic(rng: &mut rand_chacha::ChaCha8Rng, size: usize, nvars: usize, degree: usize, all_vars: bool) -> Result<AntiAnalytic> {
    let mut p = crate::instance::random_poly(rng, size, 1, nvars, degree);
    let keep: Vec<(MultiIndex, CMat)> = p
        .terms()
        .filter(|(idx, _)| if all_vars { !idx.entries().contains(&0) } else { idx.total_degree() > 0 })
        .map(|(i, c)| (i.clone(), c.clone()))
        .collect();
    p = MatPoly::from_coeffs(size, 1, nvars, keep)?;
    if all_vars {
        AntiAnalytic::vanishing_on_axes(p)
    } else {
        AntiAnalytic::new(p)
    }
}

/// Column polynomial from a coefficient list `[(exponent, vector)]`.
pub fn column_poly(nvars: usize, terms: &[(Vec<usize>, Vec<Complex64>)]) -> Result<MatPoly> {
    let size = terms.first().map_or(1, |t| t.1.len());
    MatPoly::from_coeffs(size, 1, nvars, terms.iter().map(|(i, v)| (MultiIndex::new(i.clone()), CMat::from_column_slice(v.len(), 1, v))))
}
