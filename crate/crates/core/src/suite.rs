//! Check runners that turn the numerical experiments into table rows.

use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::hardy::{
    circle_points, decompose_hperp, decompose_k, hp_multiplier_pair, outer_function, riesz_constant, riesz_search, BundleGrid, FourierTensor,
};
use crate::instance::random_poly;
use crate::pointwise::{check_identities_on_grid, CoronaInstance, DEFAULT_FD_STEP};
use crate::potential::{laplacian_fd_residual, laplacian_phi, verify_potentials, POTENTIAL_TOL};
use crate::quad::{
    carleson_ratio, corona_constant, functional_bound_report, functional_l, functional_l_in_var, green_residual, littlewood_paley_residual,
    make_quadrature, random_anti_analytic, trent_constant, xi_embedding_check, xi_norm_sq, DiskQuadrature, EMBEDDING_TOL,
};
use crate::solver::{default_truncation, f0_baseline, solve_and_report};
use crate::{CMat, CVec, MatPoly};

/// One line of a report.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub instance: String,
    pub check: String,
    pub value: f64,
    pub bound: Option<f64>,
    /// `None` for informational rows.
    pub passed: Option<bool>,
    pub runtime_ms: f64,
}

impl CheckRow {
    fn le(instance: &str, check: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { instance: instance.into(), check: check.into(), value, bound: Some(bound), passed: Some(value <= bound), runtime_ms: 0.0 }
    }

    fn ge(instance: &str, check: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { instance: instance.into(), check: check.into(), value, bound: Some(bound), passed: Some(value >= bound), runtime_ms: 0.0 }
    }

    fn info(instance: &str, check: impl Into<String>, value: f64, bound: Option<f64>) -> Self {
        Self { instance: instance.into(), check: check.into(), value, bound, passed: None, runtime_ms: 0.0 }
    }
}

/// Rows in execution order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuiteReport {
    pub rows: Vec<CheckRow>,
}

impl SuiteReport {
    pub fn extend(&mut self, rows: Vec<CheckRow>) {
        self.rows.extend(rows);
    }

    /// Whether every row with a verdict passed.
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed != Some(false))
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| r.passed == Some(false))
    }

    /// Tab-separated table with a header line. Runtimes print as `-` unless
    /// `timing` is set, so reports are reproducible byte for byte.
    pub fn to_tsv(&self, timing: bool) -> String {
        let mut out = String::from("instance\tcheck\tvalue\tbound\tpassed\truntime_ms\n");
        for r in &self.rows {
            let bound = r.bound.map_or_else(|| "-".to_string(), fmt_num);
            let passed = match r.passed {
                Some(true) => "true",
                Some(false) => "false",
                None => "-",
            };
            let runtime = if timing { format!("{:.1}", r.runtime_ms) } else { "-".to_string() };
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", r.instance, r.check, fmt_num(r.value), bound, passed, runtime);
        }
        out
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.10e}")
    }
}

fn timed(f: impl FnOnce() -> Result<Vec<CheckRow>>) -> Result<Vec<CheckRow>> {
    let start = Instant::now();
    let mut rows = f()?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    for r in &mut rows {
        r.runtime_ms = ms;
    }
    Ok(rows)
}

/// Knobs shared by the runners.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Identity residual gate.
    pub tol: f64,
    /// Grid override; its meaning depends on the check.
    pub grid: Option<usize>,
    pub band: usize,
    pub truncation: Option<usize>,
    pub p: Option<f64>,
    pub trials: usize,
    pub max_iter: usize,
    pub projection_tol: f64,
    pub fd_step: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            tol: 1e-6,
            grid: None,
            band: 32,
            truncation: None,
            p: None,
            trials: 5,
            max_iter: 500,
            projection_tol: 1e-6,
            fd_step: DEFAULT_FD_STEP,
        }
    }
}

impl SuiteConfig {
    /// Disk quadrature: `grid x 2 grid`, default 128 x 256.
    pub fn disk_quadrature(&self) -> Result<DiskQuadrature> {
        let radial = self.grid.unwrap_or(128);
        make_quadrature(radial, 2 * radial)
    }

    /// Quadrature for polydisk functionals: `grid x 2 grid` with `grid`
    /// frozen nodes per other variable, default 24.
    pub fn polydisk_quadrature(&self) -> Result<(DiskQuadrature, usize)> {
        let radial = self.grid.unwrap_or(24);
        Ok((make_quadrature(radial, 2 * radial)?, radial))
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(salt))
    }
}

/// Derivative identities on an interior `grid x grid` mesh (default 32).
pub fn identity_checks(inst: &CoronaInstance, cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    timed(|| {
        let side = cfg.grid.unwrap_or(32);
        let rep = check_identities_on_grid(&inst.f, side, cfg.fd_step)?;
        let n = &inst.name;
        Ok(vec![
            CheckRow::le(n, "identities.d_pi", rep.d_pi, cfg.tol),
            CheckRow::le(n, "identities.dbar_phi", rep.dbar_phi, cfg.tol),
            CheckRow::le(n, "identities.ddbar_phi", rep.ddbar_phi, cfg.tol),
            CheckRow::le(n, "identities.projection", rep.pi_d_pi.max(rep.d_pi_pi).max(rep.dbar_pi_pi).max(rep.pi_dbar_pi), cfg.tol),
        ])
    })
}

/// Potential ranges, Laplacian gaps and the finite-difference Laplacian
/// (grid density default 32, sampled at 64 interior points for the
/// difference check).
pub fn potential_checks(inst: &CoronaInstance, cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    timed(|| {
        let density = cfg.grid.unwrap_or(32);
        let rep = verify_potentials(inst, density)?;
        let n = &inst.name;
        let gated = |row: CheckRow| if rep.hypothesis_holds { row } else { CheckRow { passed: None, ..row } };
        let mut rng = cfg.rng(0x9071);
        let pts: Vec<Vec<Complex64>> = (0..64)
            .map(|_| {
                (0..inst.nvars())
                    .map(|_| Complex64::from_polar(0.95 * rng.random::<f64>().sqrt(), std::f64::consts::TAU * rng.random::<f64>()))
                    .collect()
            })
            .collect();
        let fd = laplacian_fd_residual(&inst.f, inst.delta_sq, &pts, 1e-3)?;
        Ok(vec![
            gated(CheckRow::ge(n, "potentials.gap_phi", rep.worst_gap_phi, -POTENTIAL_TOL)),
            gated(CheckRow::ge(n, "potentials.gap_psi", rep.worst_gap_psi, -POTENTIAL_TOL)),
            CheckRow::ge(n, "potentials.phi_min", rep.min_phi, -POTENTIAL_TOL),
            CheckRow::le(n, "potentials.phi_max", rep.max_phi, rep.k + POTENTIAL_TOL),
            CheckRow::le(n, "potentials.laplacian_fd", fd, 1e-5),
        ])
    })
}

fn random_column(rng: &mut ChaCha8Rng, size: usize, degree: usize) -> MatPoly {
    random_poly(rng, size, 1, 1, degree)
}

/// Carleson ratios against `e` for `phi = log det FF* - r log delta^2` and
/// random analytic `f`, and both embedding inequalities for `xi = Pi h`
/// with random anti-analytic `h`, `cfg.trials` pairs per instance. Disk only.
pub fn embedding_checks(inst: &CoronaInstance, cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    timed(|| {
        let n = &inst.name;
        if inst.nvars() != 1 {
            return Ok(vec![CheckRow::info(n, "embedding.skipped_polydisk", inst.nvars() as f64, None)]);
        }
        let q = cfg.disk_quadrature()?;
        let sup = verify_potentials(inst, 64)?.max_phi;
        let mut rng = cfg.rng(0xE3B);
        let mut rows = Vec::new();
        for t in 0..cfg.trials {
            let f = random_column(&mut rng, 2, 4);
            let lap = |z: Complex64| laplacian_phi(&inst.f, &[z], 0);
            if sup > 0.0 {
                let rep = carleson_ratio(&lap, sup, &f, &q)?;
                rows.push(CheckRow::le(n, format!("embedding.carleson.{t}"), rep.ratio, rep.bound + EMBEDDING_TOL));
            } else {
                rows.push(CheckRow::info(n, format!("embedding.carleson.{t}"), 0.0, Some(std::f64::consts::E)));
            }
            let h = random_anti_analytic(&mut rng, inst.cols(), 1, 3, false)?;
            let xi = xi_embedding_check(inst, &h, &q)?;
            rows.push(CheckRow::le(n, format!("embedding.xi_potential.{t}"), xi.potential.ratio, xi.potential.bound + EMBEDDING_TOL));
            rows.push(CheckRow::le(n, format!("embedding.xi_gradient.{t}"), xi.gradient.ratio, xi.gradient.bound + EMBEDDING_TOL));
            rows.push(CheckRow::le(n, format!("embedding.green_identity.{t}"), (xi.green_identity - 1.0).abs(), 1e-8));
        }
        Ok(rows)
    })
}

/// The witness `phi = |z|^2`, `f = 1`, whose Carleson ratio is exactly 1.
pub fn carleson_witness(q: &DiskQuadrature) -> Result<CheckRow> {
    let one = MatPoly::constant(CMat::from_element(1, 1, Complex64::new(1.0, 0.0)), 1);
    let rep = carleson_ratio(&|_| Ok(1.0), 1.0, &one, q)?;
    Ok(CheckRow::le("-", "embedding.carleson_witness", (rep.ratio - 1.0).abs(), 1e-9))
}

/// Three-term agreement and the bound `|L(xi)| <= C(r, delta) ||xi||_2 ||g||_2`
/// on the disk; on the polydisk, agreement of the one-variable functionals
/// `L_j` on `xi = Pi h` with `h` anti-analytic in every variable.
pub fn functional_checks(inst: &CoronaInstance, cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    timed(|| {
        let n = &inst.name;
        let mut rng = cfg.rng(0xF0C);
        let mut rows = Vec::new();
        if inst.nvars() == 1 {
            let q = cfg.disk_quadrature()?;
            for t in 0..cfg.trials {
                let h = random_anti_analytic(&mut rng, inst.cols(), 1, 3, false)?;
                let terms = functional_l(inst, &h, &q)?;
                let xi_norm = xi_norm_sq(inst, &h, &q)?.sqrt();
                rows.push(CheckRow::le(n, format!("functional.agreement.{t}"), terms.agreement(), 1e-5));
                let rep = functional_bound_report(inst, &terms, xi_norm);
                rows.push(CheckRow::le(n, format!("functional.bound.{t}"), rep.ratio, rep.bound));
            }
            rows.push(CheckRow::le(n, "functional.constant_vs_trent", corona_constant(), trent_constant()));
        } else {
            let (q, frozen) = cfg.polydisk_quadrature()?;
            for t in 0..cfg.trials {
                let h = random_anti_analytic(&mut rng, inst.cols(), inst.nvars(), inst.nvars() + 1, true)?;
                let first = functional_l_in_var(inst, &h, &q, 0, frozen)?;
                rows.push(CheckRow::le(n, format!("functional.agreement.v0.{t}"), first.agreement(), 1e-5));
                for var in 1..inst.nvars() {
                    let other = functional_l_in_var(inst, &h, &q, var, frozen)?;
                    rows.push(CheckRow::le(n, format!("functional.l_agreement.v0_v{var}.{t}"), (first.area() - other.area()).norm(), 1e-4));
                }
            }
        }
        Ok(rows)
    })
}

/// Minimal-norm solve against the explicit bound, plus the smooth solution
/// `Phi g` against `||g||_2 / delta`.
pub fn solve_checks(inst: &CoronaInstance, cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    timed(|| {
        let n = &inst.name;
        let p = cfg.p.unwrap_or(inst.p);
        let trunc = cfg.truncation.unwrap_or_else(|| if inst.nvars() == 1 { default_truncation(inst) } else { default_truncation(inst).min(8) });
        let rep = solve_and_report(inst, trunc, p)?;
        let mut rows = Vec::new();
        if let Some(res) = rep.residual_l2 {
            rows.push(CheckRow::le(n, "solve.residual", res, 1e-9));
        }
        match (rep.achieved_norm, rep.bound_value) {
            (Some(a), Some(b)) => {
                rows.push(CheckRow { passed: rep.passed, ..CheckRow::le(n, format!("solve.norm_p{}", fmt_p(p)), a, b * rep.g_norm) });
            }
            (Some(a), None) => rows.push(CheckRow::info(n, format!("solve.norm_p{}.hypothesis_fails", fmt_p(p)), a, None)),
            (None, Some(b)) => rows.push(CheckRow::info(n, format!("solve.bound_only_p{}", fmt_p(p)), b * rep.g_norm, None)),
            (None, None) => {}
        }
        if let (Some(a), Some(t)) = (rep.achieved_norm, rep.trent_bound) {
            rows.push(CheckRow::le(n, "solve.trent_bound", a, t * rep.g_norm));
        }
        if inst.nvars() == 1 {
            let q = make_quadrature(32, 256)?;
            let f0 = f0_baseline(inst, &q)?;
            rows.push(CheckRow::le(n, "solve.f0_sup_ratio", f0.sup_ratio, f0.inv_delta + 1e-10));
            rows.push(CheckRow::le(n, "solve.f0_norm", f0.boundary_norm, f0.g_norm * f0.inv_delta + 1e-10));
        }
        Ok(rows)
    })
}

fn fmt_p(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

/// Random `h` in `(H^2)^perp` with `|k_v| <= degree`.
pub fn random_hperp(rng: &mut ChaCha8Rng, nvars: usize, band: usize, dim: usize, degree: i64) -> FourierTensor {
    let mut t = FourierTensor::zeros(nvars, band, dim);
    for off in 0..t.block() {
        let k = t.unflat(off);
        if k.iter().all(|&v| v >= 0) || k.iter().any(|&v| v.abs() > degree) {
            continue;
        }
        for c in 0..dim {
            let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            t.set(&k, c, v).expect("index in band");
        }
    }
    t
}

/// Exponents for the `L^q` bounds on the decomposition pieces.
pub const DECOMPOSITION_QS: [f64; 2] = [4.0 / 3.0, 4.0];

/// Splitting of `h in (H^2)^perp` and of `xi = Pi h / ||Pi h||_2` on the
/// torus grid of band `cfg.band`, `cfg.trials` draws per instance.
pub fn decompose_checks(inst: &CoronaInstance, cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    timed(|| {
        let name = &inst.name;
        let nv = inst.nvars();
        let bundle = BundleGrid::for_band(&inst.f, inst.delta_sq, cfg.band)?;
        let mut rng = cfg.rng(0xDEC);
        let mut rows = Vec::new();
        for t in 0..cfg.trials {
            let h = random_hperp(&mut rng, nv, cfg.band, inst.cols(), 3.min(cfg.band as i64));
            let parts = decompose_hperp(&h)?;
            let mut sum = FourierTensor::zeros(nv, cfg.band, inst.cols());
            for p in &parts {
                sum = sum.add(p);
            }
            let leak = parts.iter().enumerate().map(|(j, p)| p.max_abs_where(|k| k[j] >= 0)).fold(0.0, f64::max);
            rows.push(CheckRow::le(name, format!("decompose.hperp_reconstruction.{t}"), sum.sub(&h).norm(), 0.0));
            rows.push(CheckRow::le(name, format!("decompose.hperp_membership.{t}"), leak, 0.0));

            let xi = bundle.apply_tensor(&h)?;
            let xi = xi.scale(Complex64::new(1.0 / xi.norm(), 0.0));
            let dec = decompose_k(&xi, &bundle, cfg.max_iter, cfg.projection_tol)?;
            rows.push(CheckRow::le(name, format!("decompose.k_pythagoras.{t}"), dec.pythagoras_gap(&xi), 1e-4));
            rows.push(CheckRow::le(name, format!("decompose.k_reconstruction.{t}"), dec.reconstruction_error(&xi), 1e-5));
            rows.push(CheckRow::le(
                name,
                format!("decompose.k_iterations.{t}"),
                dec.iterations.iter().copied().max().unwrap_or(0) as f64,
                (cfg.max_iter - 1) as f64,
            ));
            for q in DECOMPOSITION_QS {
                for (j, (norm, bound)) in dec.lq_bounds(&xi, q, bundle.side)?.into_iter().enumerate() {
                    rows.push(CheckRow::le(name, format!("decompose.lq_q{:.4}_j{}.{t}", q, j + 1), norm, bound + 1e-4));
                }
            }
        }
        Ok(rows)
    })
}

/// Default band for the Riesz search.
pub const RIESZ_BAND: usize = 256;

/// Empirical Riesz projection norm at `p` against `1 / sin(pi / p)`.
pub fn riesz_checks(p: f64, band: usize, cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    timed(|| {
        let s = riesz_search(p, band, cfg.trials, cfg.seed)?;
        let c = riesz_constant(p);
        let mut rows = vec![CheckRow::le("-", format!("riesz.p{}", fmt_p(p)), s.value, c + 1e-6)];
        if p == 2.0 {
            rows.push(CheckRow::le("-", "riesz.p2_parseval", (s.value - 1.0).abs(), 1e-12));
        } else {
            rows.push(CheckRow::info("-", format!("riesz.p{}.random_only", fmt_p(p)), s.random_best, Some(c)));
            rows.push(CheckRow::info("-", format!("riesz.p{}.family_only", fmt_p(p)), s.family_best, Some(c)));
        }
        Ok(rows)
    })
}

type RealField = dyn Fn(Complex64) -> f64 + Sync;

/// Mass, radial moments, Green's formula and Littlewood-Paley on `q`.
pub fn quadrature_checks(q: &DiskQuadrature, cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    timed(|| {
        let mut rows = vec![CheckRow::le("-", "quadrature.mass", (q.total_mass() - 1.0).abs(), 1e-12)];
        for k in 1..=8 {
            let m: f64 = q.integrate_disk(|z: Complex64| z.norm_sqr().powi(k));
            rows.push(CheckRow::le("-", format!("quadrature.moment_{k}"), (m - 1.0 / ((k + 1) * (k + 1)) as f64).abs(), 1e-9));
        }
        let cases: [(&str, &RealField, &RealField); 3] = [
            ("abs_sq", &|z| z.norm_sqr(), &|_| 1.0),
            ("re", &|z| z.re, &|_| 0.0),
            ("abs_4", &|z| z.norm_sqr().powi(2), &|z| 4.0 * z.norm_sqr()),
        ];
        for (label, u, lap) in cases {
            rows.push(CheckRow::le("-", format!("quadrature.green_{label}"), green_residual(u, lap, q), 1e-9));
        }
        let mut rng = cfg.rng(0x19);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let g = random_column(&mut rng, 2, 6);
            worst = worst.max(littlewood_paley_residual(&g, q)?);
        }
        rows.push(CheckRow::le("-", "quadrature.littlewood_paley", worst, 1e-9));
        rows.push(carleson_witness(q)?);
        Ok(rows)
    })
}

/// Smooth nonvanishing boundary samples `(1 + sum_k c_k z^k) e_0 + ...`.
fn smooth_vector_samples(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<CVec> {
    let coeffs: Vec<Vec<Complex64>> =
        (0..4).map(|_| (0..dim).map(|_| Complex64::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2))).collect()).collect();
    circle_points(n)
        .iter()
        .map(|z| {
            CVec::from_fn(dim, |i, _| {
                let mut v = if i == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
                let mut zk = *z;
                for row in &coeffs {
                    v += row[i] * zk;
                    zk *= z;
                }
                v
            })
        })
        .collect()
}

/// Outer-function modulus recovery at `N = 4096` and the multiplier norm
/// identities for `p in {1, 3/2, inf}`.
pub fn outer_checks(cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    timed(|| {
        let n = 4096;
        let pts = circle_points(n);
        let mut rng = cfg.rng(0x0C7);
        let trig: Vec<(usize, Complex64)> = (1..=5).map(|k| (k, Complex64::new(rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15)))).collect();
        let moduli: Vec<(&str, Vec<f64>)> = vec![
            ("one_plus_half_z", pts.iter().map(|z| (1.0 + 0.5 * z).norm()).collect()),
            ("z_minus_two", pts.iter().map(|z| (z - 2.0).norm()).collect()),
            (
                "exp_trig",
                pts.iter()
                    .map(|z| {
                        let u: f64 = trig.iter().map(|(k, c)| 2.0 * (c * z.powu(*k as u32)).re).sum();
                        u.exp()
                    })
                    .collect(),
            ),
        ];
        let mut rows = Vec::new();
        for (label, w) in &moduli {
            let o = outer_function(w)?;
            rows.push(CheckRow::le("-", format!("outer.modulus_{label}"), o.modulus_error(w), 1e-6));
        }
        let g = smooth_vector_samples(&mut rng, n, 2);
        let xi = smooth_vector_samples(&mut rng, n, 2);
        for p in [1.0, 1.5, f64::INFINITY] {
            let r = hp_multiplier_pair(&g, &xi, p)?.report;
            rows.push(CheckRow::le("-", format!("outer.identity_p{}", fmt_p(p)), r.identity_gap(), 1e-6));
            rows.push(CheckRow::le("-", format!("outer.holder_p{}", fmt_p(p)), r.holder_lhs, r.holder_rhs + 1e-6));
        }
        Ok(rows)
    })
}

/// Every per-instance check that applies.
pub fn instance_report(inst: &CoronaInstance, cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    let mut rows = identity_checks(inst, cfg)?;
    rows.extend(potential_checks(inst, cfg)?);
    rows.extend(embedding_checks(inst, cfg)?);
    rows.extend(functional_checks(inst, cfg)?);
    rows.extend(solve_checks(inst, cfg)?);
    if inst.nvars() >= 2 {
        rows.extend(decompose_checks(inst, cfg)?);
    }
    Ok(rows)
}
