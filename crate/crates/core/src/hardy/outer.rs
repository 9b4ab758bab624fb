//! Scalar outer functions from boundary moduli, and the multiplier pairs
//! that move an `H^p` / `L^q` pairing into `H^2` / `L^2`.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::tensor::lq_mean;
use crate::error::{CoronaError, Result};
use crate::CVec;

/// Smallest modulus sample accepted by [`outer_function`].
pub const MODULUS_FLOOR: f64 = 1e-8;

/// Outer function `O` with `|O| = w` at `N` equispaced points of the circle.
#[derive(Clone, Debug)]
pub struct OuterFunction {
    /// `O(e^{2 pi i n / N})`.
    pub boundary_samples: Vec<Complex64>,
    /// Taylor coefficients `O_0, ..., O_{N/2}`.
    pub analytic_coeffs: Vec<Complex64>,
    /// Boundary samples of `log O`.
    log_samples: Vec<Complex64>,
    /// Taylor coefficients of `log O`.
    log_coeffs: Vec<Complex64>,
}

impl OuterFunction {
    pub fn len(&self) -> usize {
        self.boundary_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundary_samples.is_empty()
    }

    /// `O(0) = exp(mean log w)`.
    pub fn value_at_zero(&self) -> f64 {
        self.log_coeffs[0].re.exp()
    }

    /// Boundary samples of `O^a = exp(a log O)`.
    pub fn power(&self, a: f64) -> Vec<Complex64> {
        self.log_samples.iter().map(|l| (l * a).exp()).collect()
    }

    /// `O(z)` for `|z| < 1` from the truncated Taylor series.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.analytic_coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// `log O(z)` for `|z| < 1`.
    pub fn log_eval(&self, z: Complex64) -> Complex64 {
        self.log_coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// Sup over the samples of `| |sum_k O_k z^k| - w |`: the modulus error
    /// of the boundary values rebuilt from the Taylor coefficients alone.
    pub fn modulus_error(&self, modulus: &[f64]) -> f64 {
        let n = self.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[..self.analytic_coeffs.len()].copy_from_slice(&self.analytic_coeffs);
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        buf.iter().zip(modulus).map(|(v, w)| (v.norm() - w).abs()).fold(0.0, f64::max)
    }
}

/// Outer function with boundary modulus `modulus` sampled at `N` equispaced
/// points, `N` even. The harmonic conjugate is normalized to vanish at 0, so
/// `O(0) > 0`.
pub fn outer_function(modulus: &[f64]) -> Result<OuterFunction> {
    let n = modulus.len();
    if n < 4 || !n.is_multiple_of(2) {
        return Err(CoronaError::InvalidArgument(format!("outer function needs an even sample count >= 4, got {n}")));
    }
    if let Some((i, w)) = modulus.iter().enumerate().find(|(_, w)| !(**w >= MODULUS_FLOOR) || !w.is_finite()) {
        return Err(CoronaError::InvalidArgument(format!("modulus sample {i} is {w:e}, below {MODULUS_FLOOR:e}")));
    }
    let mut planner = FftPlanner::new();
    let mut spec: Vec<Complex64> = modulus.iter().map(|w| Complex64::new(w.ln(), 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut spec);
    let inv_n = 1.0 / n as f64;
    let half = n / 2;
    let mut log_coeffs = Vec::with_capacity(half + 1);
    log_coeffs.push(Complex64::new(spec[0].re * inv_n, 0.0));
    for v in &spec[1..half] {
        log_coeffs.push(v * (2.0 * inv_n));
    }
    log_coeffs.push(Complex64::new(spec[half].re * inv_n, 0.0));

    let mut log_samples = vec![Complex64::new(0.0, 0.0); n];
    log_samples[..=half].copy_from_slice(&log_coeffs);
    planner.plan_fft_inverse(n).process(&mut log_samples);
    for (l, w) in log_samples.iter_mut().zip(modulus) {
        // the real part is ln w up to rounding; pin it
        l.re = w.ln();
    }
    let boundary_samples: Vec<Complex64> = log_samples.iter().map(|l| l.exp()).collect();

    let mut coeffs = boundary_samples.clone();
    planner.plan_fft_forward(n).process(&mut coeffs);
    let analytic_coeffs = coeffs[..=half].iter().map(|c| c * inv_n).collect();
    Ok(OuterFunction { boundary_samples, analytic_coeffs, log_samples, log_coeffs })
}

/// Transformed pair `(g~, xi~)` and the norm relations it satisfies.
#[derive(Clone, Debug)]
pub struct MultiplierPair {
    pub g_tilde: Vec<CVec>,
    pub xi_tilde: Vec<CVec>,
    pub report: MultiplierReport,
}

/// Norm relations for a multiplier pair. For `p <= 2` the identity is
/// `||g~||_2 = ||g||_p^{p/2}` and the inequality
/// `||xi~||_2 <= ||xi||_q ||g||_p^{(2-p)/2}`; for `p > 2` the roles of `g`
/// and `xi` swap.
#[derive(Clone, Debug)]
pub struct MultiplierReport {
    pub p: f64,
    pub q: f64,
    pub g_norm_p: f64,
    pub xi_norm_q: f64,
    pub g_tilde_norm: f64,
    pub xi_tilde_norm: f64,
    pub identity_lhs: f64,
    pub identity_rhs: f64,
    pub holder_lhs: f64,
    pub holder_rhs: f64,
    /// `sup_z |<g~, xi~> - <g, xi>|`.
    pub pairing_error: f64,
}

impl MultiplierReport {
    pub fn identity_gap(&self) -> f64 {
        (self.identity_lhs - self.identity_rhs).abs()
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.identity_gap() <= tol && self.holder_lhs <= self.holder_rhs + tol && self.pairing_error <= tol
    }
}

fn conjugate_exponent(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

fn norms(v: &[CVec]) -> Vec<f64> {
    v.iter().map(|x| x.norm()).collect()
}

fn outer_of(samples: &[CVec], what: &str) -> Result<OuterFunction> {
    let m = norms(samples);
    if m.iter().any(|w| *w < MODULUS_FLOOR) {
        return Err(CoronaError::InvalidArgument(format!("{what} vanishes on the sample grid")));
    }
    outer_function(&m)
}

fn times(a: &[Complex64], v: &[CVec]) -> Vec<CVec> {
    a.iter().zip(v).map(|(s, x)| x * *s).collect()
}

/// Builds `(g~, xi~)` from boundary samples of `g` and `xi` for
/// `1 <= p <= inf`:
///
/// * `p < 2`: `g~ = g_out^{p/2-1} g`, `xi~ = conj(g_out)^{1-p/2} xi`;
/// * `p > 2`: `g~ = xi_out^{1-q/2} g`, `xi~ = conj(xi_out)^{q/2-1} xi`;
/// * `p = inf`: `g~ = conj(xi_out)^{1/2} g`, `xi~ = xi_out^{-1/2} xi`.
///
/// Every branch keeps `<g~, xi~> = <g, xi>` pointwise.
pub fn hp_multiplier_pair(g: &[CVec], xi: &[CVec], p: f64) -> Result<MultiplierPair> {
    if g.len() != xi.len() {
        return Err(CoronaError::Dimension(format!("{} samples of g but {} of xi", g.len(), xi.len())));
    }
    if !(p >= 1.0) {
        return Err(CoronaError::InvalidArgument(format!("exponent {p} below 1")));
    }
    let q = conjugate_exponent(p);
    let (g_tilde, xi_tilde) = if p == 2.0 {
        (g.to_vec(), xi.to_vec())
    } else if p < 2.0 {
        let out = outer_of(g, "g")?;
        let a = out.power(p / 2.0 - 1.0);
        let b: Vec<Complex64> = out.power(1.0 - p / 2.0).iter().map(|c| c.conj()).collect();
        (times(&a, g), times(&b, xi))
    } else if p.is_infinite() {
        let out = outer_of(xi, "xi")?;
        let a: Vec<Complex64> = out.power(0.5).iter().map(|c| c.conj()).collect();
        let b = out.power(-0.5);
        (times(&a, g), times(&b, xi))
    } else {
        let out = outer_of(xi, "xi")?;
        let a = out.power(1.0 - q / 2.0);
        let b: Vec<Complex64> = out.power(q / 2.0 - 1.0).iter().map(|c| c.conj()).collect();
        (times(&a, g), times(&b, xi))
    };

    let g_norm_p = lq_mean(&norms(g), p);
    let xi_norm_q = lq_mean(&norms(xi), q);
    let g_tilde_norm = lq_mean(&norms(&g_tilde), 2.0);
    let xi_tilde_norm = lq_mean(&norms(&xi_tilde), 2.0);
    let (identity_lhs, identity_rhs, holder_lhs, holder_rhs) = if p <= 2.0 {
        (g_tilde_norm, g_norm_p.powf(p / 2.0), xi_tilde_norm, xi_norm_q * g_norm_p.powf((2.0 - p) / 2.0))
    } else {
        (xi_tilde_norm, xi_norm_q.powf(q / 2.0), g_tilde_norm, g_norm_p * xi_norm_q.powf((2.0 - q) / 2.0))
    };
    let pairing_error = g
        .iter()
        .zip(xi)
        .zip(g_tilde.iter().zip(&xi_tilde))
        .map(|((a, b), (at, bt))| (bt.dotc(at) - b.dotc(a)).norm())
        .fold(0.0, f64::max);
    Ok(MultiplierPair {
        g_tilde,
        xi_tilde,
        report: MultiplierReport {
            p,
            q,
            g_norm_p,
            xi_norm_q,
            g_tilde_norm,
            xi_tilde_norm,
            identity_lhs,
            identity_rhs,
            holder_lhs,
            holder_rhs,
            pairing_error,
        },
    })
}

/// `N` equispaced circle points.
pub fn circle_points(n: usize) -> Vec<Complex64> {
    (0..n).map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / n as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constant_modulus() {
        let o = outer_function(&[2.5; 64]).unwrap();
        assert!((o.value_at_zero() - 2.5).abs() < 1e-14);
        assert!((o.analytic_coeffs[0] - c(2.5, 0.0)).norm() < 1e-13);
        assert!(o.analytic_coeffs[1..].iter().all(|a| a.norm() < 1e-13));
    }

    #[test]
    fn recovers_one_plus_half_z() {
        let n = 4096;
        let pts = circle_points(n);
        let w: Vec<f64> = pts.iter().map(|z| (1.0 + 0.5 * z).norm()).collect();
        let o = outer_function(&w).unwrap();
        let err = pts.iter().zip(&o.boundary_samples).map(|(z, v)| (v - (1.0 + 0.5 * z)).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        assert!((o.analytic_coeffs[1] - c(0.5, 0.0)).norm() < 1e-12);
        assert!(o.modulus_error(&w) < 1e-12);
    }

    #[test]
    fn z_minus_two_gives_two_minus_z() {
        let n = 4096;
        let pts = circle_points(n);
        let w: Vec<f64> = pts.iter().map(|z| (z - 2.0).norm()).collect();
        let o = outer_function(&w).unwrap();
        assert!((o.value_at_zero() - 2.0).abs() < 1e-12);
        for z in [c(0.0, 0.0), c(0.5, 0.3), c(-0.9, 0.1)] {
            assert!((o.eval(z) - (2.0 - z)).norm() < 1e-10);
        }
        for r in [0.0, 0.5, 0.99] {
            for z in circle_points(32) {
                assert!(o.eval(z * r).norm() > 0.5);
            }
        }
    }

    #[test]
    fn outer_is_idempotent_on_outer_moduli() {
        let n = 1024;
        let pts = circle_points(n);
        let w: Vec<f64> = pts.iter().map(|z| (3.0 + z * z - 0.5 * z).norm()).collect();
        let o = outer_function(&w).unwrap();
        let w2: Vec<f64> = o.boundary_samples.iter().map(|v| v.norm()).collect();
        let o2 = outer_function(&w2).unwrap();
        let err = o.boundary_samples.iter().zip(&o2.boundary_samples).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8);
    }

    #[test]
    fn rejects_bad_moduli() {
        assert!(outer_function(&[1.0, 0.0, 1.0, 1.0]).is_err());
        assert!(outer_function(&[1.0, -1.0, 1.0, 1.0]).is_err());
        assert!(outer_function(&[1.0, 1.0, 1.0]).is_err());
    }

    fn smooth_samples(seed: u64, n: usize, dim: usize) -> Vec<CVec> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<Vec<Complex64>> = (0..4).map(|_| (0..dim).map(|_| c(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3))).collect()).collect();
        circle_points(n)
            .iter()
            .map(|z| {
                CVec::from_fn(dim, |i, _| {
                    let mut v = if i == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) };
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

    #[test]
    fn constant_g_pairs() {
        let g = vec![CVec::from_element(1, c(2.0, 0.0)); 64];
        let xi = smooth_samples(1, 64, 1);
        let pair = hp_multiplier_pair(&g, &xi, 1.5).unwrap();
        for v in &pair.g_tilde {
            assert!((v[0] - c(2f64.powf(0.75), 0.0)).norm() < 1e-13);
        }
        let r = hp_multiplier_pair(&g, &xi, 1.0).unwrap().report;
        assert!((r.g_tilde_norm - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn identities_hold_for_all_branches() {
        let g = smooth_samples(2, 4096, 2);
        let xi = smooth_samples(3, 4096, 2);
        for p in [1.0, 1.25, 1.5, 2.0, 3.0, 4.0, f64::INFINITY] {
            let r = hp_multiplier_pair(&g, &xi, p).unwrap().report;
            assert!(r.passed(1e-10), "p={p}: {r:?}");
        }
    }

    #[test]
    fn infinity_branch_identity() {
        let g = smooth_samples(4, 4096, 1);
        let xi = smooth_samples(5, 4096, 1);
        let r = hp_multiplier_pair(&g, &xi, f64::INFINITY).unwrap().report;
        assert!((r.xi_tilde_norm - r.xi_norm_q.sqrt()).abs() < 1e-12);
        assert!(r.g_tilde_norm <= r.g_norm_p * r.xi_norm_q.sqrt() + 1e-12);
    }

    #[test]
    fn vanishing_g_is_rejected() {
        let mut g = smooth_samples(6, 64, 1);
        g[3] = CVec::zeros(1);
        let xi = smooth_samples(7, 64, 1);
        assert!(hp_multiplier_pair(&g, &xi, 1.5).is_err());
        assert!(hp_multiplier_pair(&g, &xi, 4.0).is_ok());
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn recovers_smooth_moduli(a in -0.3f64..0.3, b in -0.3f64..0.3, c in -0.2f64..0.2) {
            let pts = circle_points(1024);
            let w: Vec<f64> = pts.iter().map(|z| (a * z.re + b * z.im + c * (z * z).re).exp()).collect();
            let o = outer_function(&w).unwrap();
            prop_assert!(o.modulus_error(&w) < 1e-10);
            prop_assert!(o.value_at_zero().ln().abs() < 1e-12);
        }
    }
}
