//! Analytic solutions of `F f = g` by minimum-norm solving over polynomial
//! `f`, `H^p` minimization by reweighted least squares, and comparison with
//! the explicit norm bounds.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{CoronaError, Result};
use crate::hardy::{lq_mean, riesz_constant};
use crate::linalg::singular_triplets;
use crate::matpoly::{MatPoly, MultiIndex};
use crate::pointwise::{phi_map, CoronaInstance};
use crate::quad::{corona_constant, trent_constant, DiskQuadrature};
use crate::{CMat, CVec};

/// Singular values below this fraction of the largest are dropped.
pub const RANK_TOL: f64 = 1e-10;
/// Largest constraint residual accepted as a solution.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Floor on `|f|` inside reweighting.
pub const IRLS_FLOOR: f64 = 1e-8;

/// `C(p) = 1 / sin(pi / p)` for `1 < p < inf`.
fn riesz_factor(p: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(CoronaError::InvalidArgument(format!("polydisk bound needs 1 < p < inf, got {p}")));
    }
    Ok(riesz_constant(p))
}

/// Norm bound for a solution of `F f = g` relative to `||g||_p`:
///
/// * `n = 1`: `C / delta^(r+1) log(1/delta^(2r)) + 1/delta`,
/// * `n >= 2`, `p != 2`: the same with `C` replaced by `n C C(p)^n`,
/// * `n >= 2`, `p = 2`: the same with `C` replaced by `sqrt(n) C`.
pub fn corona_bound(p: f64, r: usize, delta_sq: f64, n: usize) -> Result<f64> {
    if !(delta_sq > 0.0) {
        return Err(CoronaError::InvalidArgument(format!("delta^2 = {delta_sq} must be positive")));
    }
    if delta_sq > (-1.0f64).exp() {
        return Err(CoronaError::HypothesisViolation { delta_sq });
    }
    if n == 0 || r == 0 {
        return Err(CoronaError::InvalidArgument("r and n must be positive".into()));
    }
    if !(p >= 1.0) {
        return Err(CoronaError::InvalidArgument(format!("p = {p} below 1")));
    }
    let c = corona_constant();
    let lead = if n == 1 {
        c
    } else if p == 2.0 {
        (n as f64).sqrt() * c
    } else {
        n as f64 * c * riesz_factor(p)?.powi(n as i32)
    };
    let delta = delta_sq.sqrt();
    Ok(lead / delta.powi(r as i32 + 1) * (r as f64 * (1.0 / delta_sq).ln()) + 1.0 / delta)
}

/// Row-major enumeration of the box `prod_v [0, upper_v]`.
fn box_indices(upper: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &u in upper {
        out = out.into_iter().flat_map(|prefix| (0..=u).map(move |k| [prefix.clone(), vec![k]].concat())).collect();
    }
    out
}

fn box_offset(idx: &[usize], upper: &[usize]) -> Option<usize> {
    let mut off = 0;
    for (k, u) in idx.iter().zip(upper) {
        if k > u {
            return None;
        }
        off = off * (u + 1) + k;
    }
    Some(off)
}

/// The linear map `f -> F f` from coefficients of `f` (degree `<= N` in each
/// variable) to coefficients of `F f` (degree `<= N + deg_v F` in variable
/// `v`). Block Toeplitz for one variable, block multilevel Toeplitz in
/// general.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    pub truncation: usize,
    pub unknown_box: Vec<usize>,
    pub equation_box: Vec<usize>,
    pub matrix: CMat,
    pub rhs: CVec,
    rows: usize,
    cols: usize,
}

impl ConstraintSystem {
    pub fn new(instance: &CoronaInstance, truncation: usize) -> Result<Self> {
        let (r, m, n) = (instance.rows(), instance.cols(), instance.nvars());
        let unknown_box = vec![truncation; n];
        let equation_box: Vec<usize> = instance.f.degrees().iter().map(|d| truncation + d).collect();
        for (idx, _) in instance.g.terms() {
            if box_offset(idx.entries(), &equation_box).is_none() {
                return Err(CoronaError::InvalidArgument(format!(
                    "g has a term of degree {:?} beyond the truncation box; raise the truncation",
                    idx.entries()
                )));
            }
        }
        let unknowns = box_indices(&unknown_box);
        let n_eq = equation_box.iter().map(|u| u + 1).product::<usize>() * r;
        let mut matrix = CMat::zeros(n_eq, unknowns.len() * m);
        for (col_block, alpha) in unknowns.iter().enumerate() {
            for (gamma, coeff) in instance.f.terms() {
                let beta: Vec<usize> = alpha.iter().zip(gamma.entries()).map(|(a, g)| a + g).collect();
                let row_block = box_offset(&beta, &equation_box).expect("inside equation box");
                matrix.view_mut((row_block * r, col_block * m), (r, m)).copy_from(coeff);
            }
        }
        let mut rhs = CVec::zeros(n_eq);
        for (idx, coeff) in instance.g.terms() {
            let row_block = box_offset(idx.entries(), &equation_box).expect("checked above");
            rhs.rows_mut(row_block * r, r).copy_from(&coeff.column(0));
        }
        Ok(Self { truncation, unknown_box, equation_box, matrix, rhs, rows: r, cols: m })
    }

    /// Coefficient vector to an `m x 1` polynomial.
    pub fn to_poly(&self, x: &CVec) -> MatPoly {
        let mut f = MatPoly::zeros(self.cols, 1, self.unknown_box.len());
        for (block, alpha) in box_indices(&self.unknown_box).into_iter().enumerate() {
            let c = CMat::from_column_slice(self.cols, 1, x.rows(block * self.cols, self.cols).as_slice());
            if c.iter().any(|v| *v != Complex64::new(0.0, 0.0)) {
                f.add_term(MultiIndex::new(alpha), c).expect("shape");
            }
        }
        f
    }

    /// `||A x - b||_2`, equal to `||F f - g||_{L^2}` by Parseval.
    pub fn residual(&self, x: &CVec) -> f64 {
        (&self.matrix * x - &self.rhs).norm()
    }

    pub fn equation_rows(&self) -> usize {
        self.rows
    }
}

/// Minimum-norm solution of `A x = b` from singular triplets with relative rank tolerance
/// [`RANK_TOL`], along with an orthonormal basis of the null space of `A`.
struct MinNorm {
    x: CVec,
    null_basis: CMat,
    rank: usize,
}

fn min_norm(a: &CMat, b: &CVec, want_null: bool) -> MinNorm {
    let svd = singular_triplets(a, RANK_TOL);
    let rank = svd.values.len();
    let mut x = CVec::zeros(a.ncols());
    for (k, s) in svd.values.iter().enumerate() {
        let coef = svd.u.column(k).dotc(b) / Complex64::new(*s, 0.0);
        x += svd.v.column(k) * coef;
    }
    let null_basis = if want_null {
        // I - V_r V_r^* is the null-space projector; its unit eigenvectors span ker A
        let proj = CMat::identity(a.ncols(), a.ncols()) - &svd.v * svd.v.adjoint();
        let proj = (&proj + proj.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(proj);
        let keep: Vec<usize> = (0..a.ncols()).filter(|&k| eig.eigenvalues[k] > 0.5).collect();
        CMat::from_fn(a.ncols(), keep.len(), |i, j| eig.eigenvectors[(i, keep[j])])
    } else {
        CMat::zeros(a.ncols(), 0)
    };
    MinNorm { x, null_basis, rank }
}

/// Least-squares solution of a tall system by Householder QR, or the
/// minimum-norm one when `R` is numerically singular.
fn tall_least_squares(a: &CMat, b: &CVec) -> CVec {
    if a.ncols() == 0 {
        return CVec::zeros(0);
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].norm()).collect();
    let top = diag.iter().copied().fold(0.0, f64::max);
    if a.nrows() >= a.ncols() && diag.iter().all(|d| *d > RANK_TOL * top) {
        let rhs = qr.q().adjoint() * b;
        if let Some(x) = r.solve_upper_triangular(&rhs) {
            return x;
        }
    }
    min_norm(a, b, false).x
}

/// Analytic polynomial solution `f` of `F f = g`.
#[derive(Clone, Debug)]
pub struct SolveResult {
    /// `m x 1`, degree `<= truncation` in each variable.
    pub f: MatPoly,
    /// `||F f - g||_2`.
    pub residual_l2: f64,
    pub p: f64,
    /// `||f||_p` on the boundary torus.
    pub norm_p: f64,
    /// `||f||_2`.
    pub norm_2: f64,
    pub truncation: usize,
    pub rank: usize,
    pub feasible: bool,
    /// Reweighting rounds; zero for the direct solve.
    pub iterations: usize,
    pub converged: bool,
    /// `||f||_p` after each accepted reweighting round, starting from the
    /// minimum-`L^2` solution.
    pub objective_history: Vec<f64>,
}

/// `deg g + deg F + 8`, with degrees taken as the largest degree in any one
/// variable.
pub fn default_truncation(instance: &CoronaInstance) -> usize {
    let dg = instance.g.degrees().into_iter().max().unwrap_or(0);
    let df = instance.f.degrees().into_iter().max().unwrap_or(0);
    dg + df + 8
}

/// Minimizes `||f||_2` over polynomials of degree `<= truncation` in each
/// variable subject to `F f = g` coefficient by coefficient.
pub fn least_norm_solve(instance: &CoronaInstance, truncation: usize) -> Result<SolveResult> {
    let sys = ConstraintSystem::new(instance, truncation)?;
    let sol = min_norm(&sys.matrix, &sys.rhs, false);
    let residual_l2 = sys.residual(&sol.x);
    let norm_2 = sol.x.norm();
    Ok(SolveResult {
        f: sys.to_poly(&sol.x),
        residual_l2,
        p: 2.0,
        norm_p: norm_2,
        norm_2,
        truncation,
        rank: sol.rank,
        feasible: residual_l2 <= FEASIBILITY_TOL * sys.rhs.norm().max(1.0),
        iterations: 0,
        converged: true,
        objective_history: vec![norm_2],
    })
}

/// [`least_norm_solve`] starting at `truncation`, doubling it up to `tries`
/// times while the result is infeasible.
pub fn least_norm_solve_auto(instance: &CoronaInstance, truncation: usize, tries: usize) -> Result<SolveResult> {
    let mut n = truncation;
    let mut res = least_norm_solve(instance, n)?;
    for _ in 0..tries {
        if res.feasible {
            break;
        }
        n *= 2;
        res = least_norm_solve(instance, n)?;
    }
    Ok(res)
}

/// Boundary samples of a polynomial with degrees `<= deg_v` on the uniform
/// torus grid with `side` points per variable, one `CVec` per point in
/// row-major order with the first variable slowest.
pub fn torus_samples(f: &MatPoly, side: usize) -> Result<Vec<CVec>> {
    let n = f.nvars();
    let rows = f.rows();
    let degs = f.degrees();
    if degs.iter().any(|d| *d >= side) {
        return Err(CoronaError::InvalidArgument(format!("grid side {side} does not exceed degrees {degs:?}")));
    }
    let block = side.pow(n as u32);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(side);
    let mut comps = vec![vec![Complex64::new(0.0, 0.0); block]; rows * f.cols()];
    for (idx, c) in f.terms() {
        let off = idx.entries().iter().fold(0, |acc, k| acc * side + k);
        for i in 0..rows {
            for j in 0..f.cols() {
                comps[i * f.cols() + j][off] += c[(i, j)];
            }
        }
    }
    for comp in comps.iter_mut() {
        for axis in 0..n {
            let stride = side.pow((n - 1 - axis) as u32);
            let mut line = vec![Complex64::new(0.0, 0.0); side];
            for chunk in comp.chunks_mut(side * stride) {
                for inner in 0..stride {
                    for (t, slot) in line.iter_mut().enumerate() {
                        *slot = chunk[inner + t * stride];
                    }
                    fft.process(&mut line);
                    for (t, v) in line.iter().enumerate() {
                        chunk[inner + t * stride] = *v;
                    }
                }
            }
        }
    }
    Ok((0..block).map(|p| CVec::from_fn(rows * f.cols(), |k, _| comps[k][p])).collect())
}

/// Grid side used for boundary `L^p` norms of a polynomial with largest
/// per-variable degree `deg`: a power of two at least `4 (deg + 1)`, so
/// even-integer `p <= 4` is integrated exactly.
pub fn norm_grid_side(deg: usize, nvars: usize) -> usize {
    let base = (4 * (deg + 1)).next_power_of_two().max(16);
    if nvars == 1 {
        base.max(256)
    } else {
        base
    }
}

/// `||f||_p` over the boundary torus for a column polynomial.
pub fn boundary_norm(f: &MatPoly, p: f64) -> Result<f64> {
    let deg = f.degrees().into_iter().max().unwrap_or(0);
    let side = norm_grid_side(deg, f.nvars());
    let samples = torus_samples(f, side)?;
    let norms: Vec<f64> = samples.iter().map(|v| v.norm()).collect();
    Ok(lq_mean(&norms, p))
}

/// Minimizes `||f||_p`, `1 < p < inf`, over the same affine solution set as
/// [`least_norm_solve`], by iteratively reweighted least squares from the
/// minimum-`L^2` solution with a backtracking step that keeps the objective
/// non-increasing.
pub fn hp_least_norm(instance: &CoronaInstance, truncation: usize, p: f64, iterations: usize) -> Result<SolveResult> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(CoronaError::InvalidArgument(format!("H^p minimization needs 1 < p < inf, got {p}")));
    }
    let sys = ConstraintSystem::new(instance, truncation)?;
    let sol = min_norm(&sys.matrix, &sys.rhs, true);
    let m = instance.cols();
    let n = instance.nvars();
    let side = norm_grid_side(truncation, n);
    let pts = side.pow(n as u32);

    // boundary values are linear in the coefficients: f(z_k) = E x
    let sample = |x: &CVec| -> Result<Vec<CVec>> { torus_samples(&sys.to_poly(x), side) };
    let flatten = |vals: &[CVec]| -> CVec { CVec::from_iterator(pts * m, vals.iter().flat_map(|v| v.iter().copied())) };
    let e_x0 = flatten(&sample(&sol.x)?);
    let k = sol.null_basis.ncols();
    let cols: Vec<CVec> = (0..k).into_par_iter().map(|l| sample(&sol.null_basis.column(l).clone_owned()).map(|v| flatten(&v))).collect::<Result<_>>()?;
    let e_z = if k == 0 { CMat::zeros(pts * m, 0) } else { CMat::from_columns(&cols) };

    let objective = |vals: &CVec| -> f64 {
        let norms: Vec<f64> = (0..pts).map(|i| vals.rows(i * m, m).norm()).collect();
        lq_mean(&norms, p)
    };

    let mut u = CVec::zeros(k);
    let mut vals = e_x0.clone();
    let mut cur = objective(&vals);
    let mut history = vec![cur];
    let mut converged = k == 0;
    let mut rounds = 0;
    while rounds < iterations && !converged {
        rounds += 1;
        let weights: Vec<f64> = (0..pts).map(|i| vals.rows(i * m, m).norm().max(IRLS_FLOOR).powf((p - 2.0) / 2.0)).collect();
        let mut a = e_z.clone();
        let mut b = -e_x0.clone();
        for i in 0..pts {
            let w = Complex64::new(weights[i], 0.0);
            a.rows_mut(i * m, m).scale_mut(weights[i]);
            for r in 0..m {
                b[i * m + r] *= w;
            }
        }
        let proposal = tall_least_squares(&a, &b);
        let mut step = 1.0;
        let mut accepted = false;
        while step >= 1.0 / 64.0 {
            let trial = &u + (&proposal - &u) * Complex64::new(step, 0.0);
            let trial_vals = &e_x0 + &e_z * &trial;
            let obj = objective(&trial_vals);
            if obj < cur {
                let gain = (cur - obj) / cur;
                u = trial;
                vals = trial_vals;
                cur = obj;
                history.push(cur);
                accepted = true;
                if gain < 1e-12 {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            converged = true;
        }
    }
    let x = &sol.x + &sol.null_basis * &u;
    let residual_l2 = sys.residual(&x);
    Ok(SolveResult {
        f: sys.to_poly(&x),
        residual_l2,
        p,
        norm_p: cur,
        norm_2: x.norm(),
        truncation,
        rank: sol.rank,
        feasible: residual_l2 <= FEASIBILITY_TOL * sys.rhs.norm().max(1.0),
        iterations: rounds,
        converged,
        objective_history: history,
    })
}

/// The smooth solution `f_0 = Phi g` on the disk.
#[derive(Clone, Debug)]
pub struct F0Report {
    /// `sup ||Phi(z) g(z)|| / ||g(z)||` over interior and boundary nodes.
    pub sup_ratio: f64,
    /// `||Phi g||_{L^2(T)}`.
    pub boundary_norm: f64,
    /// `||g||_{L^2(T)}`.
    pub g_norm: f64,
    /// `1 / delta`.
    pub inv_delta: f64,
}

impl F0Report {
    pub fn passed(&self, slack: f64) -> bool {
        self.sup_ratio <= self.inv_delta + slack && self.boundary_norm <= self.g_norm * self.inv_delta + slack
    }
}

/// [`F0Report`] on the nodes of `q` (disk) or on the product of its circle
/// nodes (polydisk boundary).
pub fn f0_baseline(instance: &CoronaInstance, q: &DiskQuadrature) -> Result<F0Report> {
    let n = instance.nvars();
    let ratio_at = |z: &[Complex64]| -> Result<(f64, f64, f64)> {
        let phi = phi_map(&instance.f, instance.delta_sq, z)?;
        let g = instance.g.eval(z)?;
        let f0 = &phi * &g;
        let gn = g.norm();
        Ok((if gn > 1e-300 { f0.norm() / gn } else { 0.0 }, f0.norm_squared(), g.norm_squared()))
    };
    let circle: Vec<Vec<Complex64>> = if n == 1 {
        q.circle_nodes.iter().map(|z| vec![*z]).collect()
    } else {
        crate::pointwise::polydisk_samples(&q.circle_nodes, n)
    };
    let boundary: Vec<(f64, f64, f64)> = circle.par_iter().map(|z| ratio_at(z)).collect::<Result<_>>()?;
    let interior: Vec<f64> = if n == 1 {
        q.nodes.par_iter().map(|z| ratio_at(&[*z]).map(|t| t.0)).collect::<Result<_>>()?
    } else {
        let diag: Vec<Vec<Complex64>> = q.nodes.iter().map(|z| vec![*z; n]).collect();
        diag.par_iter().map(|z| ratio_at(z).map(|t| t.0)).collect::<Result<_>>()?
    };
    let count = boundary.len() as f64;
    let sup_ratio = boundary.iter().map(|t| t.0).chain(interior).fold(0.0, f64::max);
    let boundary_norm = (boundary.iter().map(|t| t.1).sum::<f64>() / count).sqrt();
    let g_norm = (boundary.iter().map(|t| t.2).sum::<f64>() / count).sqrt();
    Ok(F0Report { sup_ratio, boundary_norm, g_norm, inv_delta: 1.0 / instance.delta() })
}

/// Achieved norm against the explicit bound for one instance.
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub instance: String,
    pub p: f64,
    pub r: usize,
    pub n: usize,
    pub delta_sq: f64,
    /// Bound on `||f||_p / ||g||_p`; `None` when `delta^2 > 1/e`.
    pub bound_value: Option<f64>,
    /// The same bound with the older constant, for `n = 1`.
    pub trent_bound: Option<f64>,
    /// `||f||_p`; `None` for `p = 1` and `p = inf`, which are not solved.
    pub achieved_norm: Option<f64>,
    /// `||g||_p`.
    pub g_norm: f64,
    pub residual_l2: Option<f64>,
    pub truncation: usize,
    /// `None` when the hypothesis fails or nothing was solved.
    pub passed: Option<bool>,
    pub constant_c: f64,
    pub constant_trent: f64,
}

/// Solves with [`least_norm_solve`] (`p = 2`) or [`hp_least_norm`]
/// (`1 < p < inf`, 200 rounds) and compares `||f||_p` with
/// `bound * ||g||_p`.
pub fn solve_and_report(instance: &CoronaInstance, truncation: usize, p: f64) -> Result<BoundReport> {
    let (r, n) = (instance.rows(), instance.nvars());
    let hypothesis = instance.hypothesis_holds();
    let bound_value = if hypothesis { Some(corona_bound(p, r, instance.delta_sq, n)?) } else { None };
    let trent_bound = match (hypothesis, n) {
        (true, 1) => {
            let delta = instance.delta();
            Some(trent_constant() / delta.powi(r as i32 + 1) * (r as f64 * (1.0 / instance.delta_sq).ln()) + 1.0 / delta)
        }
        _ => None,
    };
    let g_norm = boundary_norm(&instance.g, p)?;
    let solved = if p == 2.0 {
        Some(least_norm_solve(instance, truncation)?)
    } else if p > 1.0 && p.is_finite() {
        Some(hp_least_norm(instance, truncation, p, 200)?)
    } else {
        None
    };
    let achieved_norm = solved.as_ref().map(|s| s.norm_p);
    let residual_l2 = solved.as_ref().map(|s| s.residual_l2);
    let passed = match (&solved, bound_value) {
        (Some(s), Some(b)) => Some(s.feasible && s.norm_p <= b * g_norm * (1.0 + 1e-12)),
        _ => None,
    };
    Ok(BoundReport {
        instance: instance.name.clone(),
        p,
        r,
        n,
        delta_sq: instance.delta_sq,
        bound_value,
        trent_bound,
        achieved_norm,
        g_norm,
        residual_l2,
        truncation,
        passed,
        constant_c: corona_constant(),
        constant_trent: trent_constant(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_instance, monomial_row_instance, GenerateSpec};
    use crate::quad::make_quadrature;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bound_values() {
        let e_inv = (-1.0f64).exp();
        let e = std::f64::consts::E;
        let at_e = corona_bound(2.0, 1, e_inv, 1).unwrap();
        assert!((at_e - (corona_constant() * e + e.sqrt())).abs() < 1e-12);
        assert!((at_e - 24.4538).abs() < 1e-3);
        let at_fifth = corona_bound(2.0, 1, 0.2, 1).unwrap();
        assert!((at_fifth - (corona_constant() / 0.2 * 5f64.ln() + 5f64.sqrt())).abs() < 1e-12);
        assert!((at_fifth - 69.745).abs() < 5e-3);
        let expect = 2.0 * corona_constant() * 2.0 * std::f64::consts::E + std::f64::consts::E.sqrt();
        assert!((corona_bound(4.0, 1, e_inv, 2).unwrap() - expect).abs() < 1e-9);
        assert!((expect - 92.87).abs() < 0.01);
        let p2 = corona_bound(2.0, 1, e_inv, 2).unwrap();
        assert!((p2 - (2f64.sqrt() * corona_constant() * std::f64::consts::E + std::f64::consts::E.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn bound_errors() {
        assert!(matches!(corona_bound(2.0, 1, 0.5, 1), Err(CoronaError::HypothesisViolation { .. })));
        assert!(corona_bound(1.0, 1, 0.2, 2).is_err());
        assert!(corona_bound(f64::INFINITY, 1, 0.2, 2).is_err());
        assert!(corona_bound(1.0, 1, 0.2, 1).is_ok());
        assert!(corona_bound(2.0, 1, 0.0, 1).is_err());
    }

    #[test]
    fn hand_instance_disk() {
        let inst = monomial_row_instance(0.5, 1).unwrap();
        let s = least_norm_solve(&inst, 16).unwrap();
        assert!((s.norm_2 - 1.25f64.sqrt() / 0.5).abs() < 1e-12, "{}", s.norm_2);
        assert!(s.residual_l2 < 1e-12);
        let f2 = s.f.coeff(&MultiIndex::zero(1)).unwrap();
        assert!((f2[(1, 0)] - c(1.25f64.sqrt() / 0.5, 0.0)).norm() < 1e-12);
        assert!(f2[(0, 0)].norm() < 1e-12);
        assert!(s.f.terms().filter(|(k, _)| k.total_degree() > 0).all(|(_, m)| m.norm() < 1e-12));
    }

    #[test]
    fn hand_instance_bidisk() {
        let inst = monomial_row_instance(0.5, 2).unwrap();
        let s = least_norm_solve(&inst, 4).unwrap();
        assert!((s.norm_2 - 1.25f64.sqrt() / 0.5).abs() < 1e-12);
        assert!(s.residual_l2 < 1e-12);
    }

    #[test]
    fn unitary_f() {
        let u = CMat::from_row_slice(2, 2, &[c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.8), c(0.6, 0.0)]);
        let f = MatPoly::constant(u.clone(), 1);
        let mut g = MatPoly::zeros(2, 1, 1);
        g.add_term(MultiIndex::zero(1), CMat::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, -0.5)])).unwrap();
        g.add_term(MultiIndex::single(1, 0, 2), CMat::from_column_slice(2, 1, &[c(0.3, 0.3), c(0.1, 0.0)])).unwrap();
        let inst = CoronaInstance::new("unitary", f, g.clone(), 1.0, 2.0).unwrap();
        let s = least_norm_solve(&inst, 4).unwrap();
        let expect = MatPoly::constant(u.adjoint(), 1).mul(&g).unwrap();
        assert!(s.f.sub(&expect).unwrap().coeff_norm() < 1e-12);
        assert!((s.norm_2 - g.coeff_norm()).abs() < 1e-12);
        for p in [1.5, 4.0] {
            let h = hp_least_norm(&inst, 4, p, 20).unwrap();
            assert!(h.f.sub(&expect).unwrap().coeff_norm() < 1e-10);
        }
    }

    #[test]
    fn minimal_norm_beats_perturbed_solutions() {
        let inst = generate_instance(&GenerateSpec::new(1, 3, 1, 2, 0.5, 7)).unwrap();
        let n = default_truncation(&inst);
        let sys = ConstraintSystem::new(&inst, n).unwrap();
        let sol = min_norm(&sys.matrix, &sys.rhs, true);
        assert!(sys.residual(&sol.x) < 1e-10);
        // x is orthogonal to ker A
        assert!((sol.null_basis.adjoint() * &sol.x).norm() < 1e-10 * sol.x.norm());
        assert!((&sys.matrix * &sol.null_basis).norm() < 1e-9);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let w = CVec::from_fn(sol.null_basis.ncols(), |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let y = &sol.x + &sol.null_basis * w;
            assert!(sys.residual(&y) < 1e-9);
            assert!(y.norm() > sol.x.norm());
        }
    }

    #[test]
    fn normal_equation_oracle() {
        let inst = generate_instance(&GenerateSpec::new(2, 4, 1, 1, 0.6, 3)).unwrap();
        let sys = ConstraintSystem::new(&inst, 6).unwrap();
        let a = &sys.matrix;
        let aa = a * a.adjoint();
        let y = aa.lu().solve(&sys.rhs).unwrap();
        let direct = a.adjoint() * y;
        let s = least_norm_solve(&inst, 6).unwrap();
        assert!((s.norm_2 - direct.norm()).abs() < 1e-9);
    }

    #[test]
    fn truncation_stability() {
        let inst = generate_instance(&GenerateSpec::new(1, 2, 1, 1, 0.5, 11)).unwrap();
        let n = default_truncation(&inst);
        let a = least_norm_solve(&inst, n).unwrap();
        let b = least_norm_solve(&inst, 2 * n).unwrap();
        assert!(a.feasible && b.feasible);
        assert!(b.norm_2 <= a.norm_2 + 1e-12);
    }

    #[test]
    fn infeasible_truncation_is_flagged() {
        // F = [z, 0]: g = 1 has no solution
        let f = MatPoly::from_coeffs(1, 2, 1, [(MultiIndex::single(1, 0, 1), CMat::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]))]).unwrap();
        let g = MatPoly::constant(CMat::from_element(1, 1, c(1.0, 0.0)), 1);
        let inst = CoronaInstance::new("bad", f, g, 1e-3, 2.0).unwrap();
        let s = least_norm_solve(&inst, 4).unwrap();
        assert!(!s.feasible);
    }

    #[test]
    fn irls_p2_matches_direct() {
        let inst = generate_instance(&GenerateSpec::new(1, 3, 1, 2, 0.5, 5)).unwrap();
        let a = least_norm_solve(&inst, 8).unwrap();
        let b = hp_least_norm(&inst, 8, 2.0, 10).unwrap();
        assert!((a.norm_2 - b.norm_p).abs() < 1e-8);
        assert!(a.f.sub(&b.f).unwrap().coeff_norm() < 1e-8);
    }

    #[test]
    fn irls_p4_improves_and_is_monotone() {
        let inst = monomial_row_instance(0.5, 1).unwrap();
        let base = least_norm_solve(&inst, 12).unwrap();
        let base4 = boundary_norm(&base.f, 4.0).unwrap();
        let h = hp_least_norm(&inst, 12, 4.0, 100).unwrap();
        assert!(h.norm_p <= base4 + 1e-12);
        assert!(h.residual_l2 < 1e-9);
        assert!(h.objective_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let gen = generate_instance(&GenerateSpec::new(1, 3, 1, 2, 0.5, 9)).unwrap();
        let h = hp_least_norm(&gen, 10, 1.5, 60).unwrap();
        assert!(h.objective_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(h.objective_history.last().unwrap() < &h.objective_history[0]);
    }

    #[test]
    fn torus_samples_match_eval() {
        let inst = generate_instance(&GenerateSpec::new(2, 3, 2, 2, 0.5, 1)).unwrap();
        let f = inst.f.clone();
        let side = 8;
        let s = torus_samples(&f, side).unwrap();
        for (p, zi) in [(0usize, [0usize, 0usize]), (13, [1, 5]), (63, [7, 7])] {
            let z: Vec<Complex64> = zi.iter().map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * *k as f64 / side as f64)).collect();
            let v = f.eval(&z).unwrap();
            let flat = CVec::from_fn(6, |k, _| v[(k / 3, k % 3)]);
            assert!((&s[p] - flat).norm() < 1e-12);
        }
    }

    #[test]
    fn f0_examples() {
        let q = make_quadrature(32, 64).unwrap();
        let f = MatPoly::constant(CMat::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]), 1);
        let g = MatPoly::constant(CMat::from_element(1, 1, c(1.0, 0.0)), 1);
        let inst = CoronaInstance::new("e1", f, g, 1.0, 2.0).unwrap();
        let r = f0_baseline(&inst, &q).unwrap();
        assert!((r.boundary_norm - 1.0).abs() < 1e-14 && (r.sup_ratio - 1.0).abs() < 1e-14);
        for seed in 0..5 {
            let inst = generate_instance(&GenerateSpec::new(1, 3, 1, 2, 0.4, seed)).unwrap();
            let r = f0_baseline(&inst, &q).unwrap();
            assert!(r.passed(1e-10), "{r:?}");
        }
    }

    #[test]
    fn report_hand_instance() {
        let inst = monomial_row_instance(0.5, 1).unwrap();
        let inst = CoronaInstance { delta_sq: 0.2, ..inst };
        let r = solve_and_report(&inst, 16, 2.0).unwrap();
        assert_eq!(r.passed, Some(true));
        assert!((r.achieved_norm.unwrap() - 5f64.sqrt()).abs() < 1e-9);
        assert!((r.bound_value.unwrap() - corona_bound(2.0, 1, 0.2, 1).unwrap()).abs() < 1e-12);
        assert!(r.bound_value.unwrap() > 69.74 && r.bound_value.unwrap() < 69.75);
        assert!(r.trent_bound.unwrap() > r.bound_value.unwrap());
    }

    #[test]
    fn report_skips_when_hypothesis_fails() {
        let inst = generate_instance(&GenerateSpec::new(1, 2, 1, 0, 0.9, 1)).unwrap();
        assert!(!inst.hypothesis_holds());
        let r = solve_and_report(&inst, 8, 2.0).unwrap();
        assert_eq!(r.passed, None);
        assert!(r.bound_value.is_none() && r.achieved_norm.is_some());
    }

    #[test]
    fn report_endpoint_exponents_only_bound() {
        let inst = CoronaInstance { delta_sq: 0.2, ..monomial_row_instance(0.5, 1).unwrap() };
        for p in [1.0, f64::INFINITY] {
            let r = solve_and_report(&inst, 8, p).unwrap();
            assert!(r.achieved_norm.is_none() && r.passed.is_none() && r.bound_value.is_some());
        }
    }
}
