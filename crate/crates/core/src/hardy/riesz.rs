//! Lower bounds for the norm of the Riesz projection `P_+` on `L^p(T)` from
//! explicit trigonometric polynomials.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use super::tensor::lq_mean;
use crate::error::{CoronaError, Result};

/// Gradient-ascent rounds run from each seed polynomial.
pub const ASCENT_STEPS: usize = 600;

/// Evaluates `||P_+ x||_p / ||x||_p` for polynomials with coefficients
/// `c_k`, `|k| <= B`, on a grid of `M` points.
struct RatioEval {
    band: usize,
    grid: usize,
    p: f64,
    inv: Arc<dyn Fft<f64>>,
    fwd: Arc<dyn Fft<f64>>,
}

struct Eval {
    ratio: f64,
    /// `d log R / d conj(c_k)` for `k = -B..=B`.
    grad: Vec<Complex64>,
}

impl RatioEval {
    fn new(p: f64, band: usize) -> Self {
        let grid = (8 * (band + 1)).next_power_of_two();
        let mut planner = FftPlanner::new();
        Self { band, grid, p, inv: planner.plan_fft_inverse(grid), fwd: planner.plan_fft_forward(grid) }
    }

    fn samples(&self, c: &[Complex64], analytic_only: bool) -> Vec<Complex64> {
        let b = self.band as i64;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.grid];
        for (i, v) in c.iter().enumerate() {
            let k = i as i64 - b;
            if analytic_only && k < 0 {
                continue;
            }
            buf[k.rem_euclid(self.grid as i64) as usize] = *v;
        }
        self.inv.process(&mut buf);
        buf
    }

    fn ratio(&self, c: &[Complex64]) -> f64 {
        let x: Vec<f64> = self.samples(c, false).iter().map(|v| v.norm()).collect();
        let y: Vec<f64> = self.samples(c, true).iter().map(|v| v.norm()).collect();
        lq_mean(&y, self.p) / lq_mean(&x, self.p)
    }

    fn eval(&self, c: &[Complex64]) -> Eval {
        let p = self.p;
        let m = self.grid as f64;
        let x = self.samples(c, false);
        let y = self.samples(c, true);
        let dx: f64 = x.iter().map(|v| v.norm().powf(p)).sum::<f64>() / m;
        let ay: f64 = y.iter().map(|v| v.norm().powf(p)).sum::<f64>() / m;
        let weight = |v: &Complex64| {
            let r = v.norm();
            if r == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                v * r.powf(p - 2.0)
            }
        };
        let mut wx: Vec<Complex64> = x.iter().map(weight).collect();
        let mut wy: Vec<Complex64> = y.iter().map(weight).collect();
        self.fwd.process(&mut wx);
        self.fwd.process(&mut wy);
        let b = self.band as i64;
        let grad = (0..c.len())
            .map(|i| {
                let k = i as i64 - b;
                let bin = k.rem_euclid(self.grid as i64) as usize;
                let from_y = if k >= 0 { wy[bin] / (m * ay) } else { Complex64::new(0.0, 0.0) };
                (from_y - wx[bin] / (m * dx)) * 0.5
            })
            .collect();
        Eval { ratio: (ay / dx).powf(1.0 / p), grad }
    }

    /// Normalized gradient ascent on `log R` with an adaptive step that only
    /// accepts improvements.
    fn ascend(&self, start: &[Complex64], steps: usize) -> (f64, Vec<Complex64>) {
        let mut c = start.to_vec();
        let mut cur = self.eval(&c);
        let mut eta = 0.05;
        for _ in 0..steps {
            let gnorm = cur.grad.iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt();
            let cnorm = c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if gnorm == 0.0 || eta < 1e-10 {
                break;
            }
            let s = eta * cnorm / gnorm;
            let trial: Vec<Complex64> = c.iter().zip(&cur.grad).map(|(v, g)| v + g * s).collect();
            let next = self.eval(&trial);
            if next.ratio > cur.ratio {
                c = trial;
                cur = next;
                eta = (eta * 1.25).min(0.5);
            } else {
                eta *= 0.5;
            }
        }
        (cur.ratio, c)
    }
}

/// Coefficients of `((1 + rho z) / (1 - rho z))^s`, degrees `0..=band`.
fn poisson_power(rho: f64, s: f64, band: usize) -> Vec<f64> {
    let mut log = vec![0.0; band + 1];
    let mut rk = 1.0;
    for (k, l) in log.iter_mut().enumerate().skip(1) {
        rk *= rho;
        if k % 2 == 1 {
            *l = 2.0 * s * rk / k as f64;
        }
    }
    let mut a = vec![0.0; band + 1];
    a[0] = 1.0;
    for n in 1..=band {
        let acc: f64 = (1..=n).map(|k| k as f64 * log[k] * a[n - k]).sum();
        a[n] = acc / n as f64;
    }
    a
}

/// `G + b conj(G - G(0))` on the circle, with `G` from [`poisson_power`].
fn poisson_trial(rho: f64, s: f64, b: f64, band: usize) -> Vec<Complex64> {
    let a = poisson_power(rho, s, band);
    let mut c = vec![Complex64::new(0.0, 0.0); 2 * band + 1];
    for (k, ak) in a.iter().enumerate() {
        c[band + k] = Complex64::new(*ak, 0.0);
        if k > 0 {
            c[band - k] = Complex64::new(b * ak, 0.0);
        }
    }
    c
}

/// Outcome of a Riesz norm search.
#[derive(Clone, Debug)]
pub struct RieszSearch {
    pub p: f64,
    pub band: usize,
    /// Quadrature points on the circle.
    pub grid: usize,
    pub value: f64,
    /// Best ratio among random Gaussian trials alone.
    pub random_best: f64,
    /// Best ratio among the Poisson-power family before ascent.
    pub family_best: f64,
}

/// `||P_+ x||_p / ||x||_p` for `x = sum_{|k| <= B} c_k z^k`, with
/// `coeffs[k + B] = c_k`, by quadrature on `8(B+1)` or more points.
pub fn riesz_ratio(coeffs: &[Complex64], p: f64) -> Result<f64> {
    if coeffs.len() % 2 != 1 {
        return Err(CoronaError::InvalidArgument("coefficient count must be odd".into()));
    }
    Ok(RatioEval::new(p, coeffs.len() / 2).ratio(coeffs))
}

/// Largest `||P_+ x||_p / ||x||_p` found over the constant polynomial,
/// `trials` standard complex Gaussian polynomials of degree at most `band`,
/// the family `G + b conj(G - G(0))` with `G = ((1 + rho z)/(1 - rho z))^s`,
/// and gradient ascent started from the best of the random and family trials.
pub fn riesz_search(p: f64, band: usize, trials: usize, seed: u64) -> Result<RieszSearch> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(CoronaError::InvalidArgument(format!("Riesz norm needs 1 < p < inf, got {p}")));
    }
    if band == 0 {
        return Err(CoronaError::InvalidArgument("band must be positive".into()));
    }
    let ev = RatioEval::new(p, band);
    let size = 2 * band + 1;
    let mut one = vec![Complex64::new(0.0, 0.0); size];
    one[band] = Complex64::new(1.0, 0.0);
    let mut value = ev.ratio(&one);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_best = f64::NEG_INFINITY;
    let mut random_start = one.clone();
    for _ in 0..trials {
        let c: Vec<Complex64> = (0..size)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect();
        let r = ev.ratio(&c);
        if r > random_best {
            random_best = r;
            random_start = c;
        }
    }
    if trials == 0 {
        random_best = value;
    }

    let mut family_best = f64::NEG_INFINITY;
    let mut family_start = one.clone();
    for t in [1.0, 2.0, 4.0, 8.0] {
        let rho = (1.0 - t / band as f64).max(0.0);
        for si in 0..=6 {
            let s = 0.2 + 0.05 * si as f64;
            for bi in 0..=9 {
                let b = -0.1 * bi as f64;
                let c = poisson_trial(rho, s, b, band);
                let r = ev.ratio(&c);
                if r > family_best {
                    family_best = r;
                    family_start = c;
                }
            }
        }
    }

    value = value.max(random_best).max(family_best);
    if p != 2.0 {
        for start in [&family_start, &random_start] {
            let (r, _) = ev.ascend(start, ASCENT_STEPS);
            value = value.max(r);
        }
    }
    Ok(RieszSearch { p, band, grid: ev.grid, value, random_best, family_best })
}

/// [`riesz_search`] value.
pub fn riesz_norm_empirical(p: f64, band: usize, trials: usize, seed: u64) -> Result<f64> {
    Ok(riesz_search(p, band, trials, seed)?.value)
}

#[cfg(test)]
mod tests {
    use super::super::riesz_constant;
    use super::*;

    #[test]
    fn p_two_is_one() {
        let v = riesz_norm_empirical(2.0, 16, 50, 1).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn poisson_power_matches_direct_series() {
        let a = poisson_power(0.5, 1.0, 10);
        // (1 + z/2)/(1 - z/2) = 1 + sum_{k>=1} 2 (1/2)^k z^k
        assert!((a[0] - 1.0).abs() < 1e-15);
        for (k, ak) in a.iter().enumerate().skip(1) {
            assert!((ak - 2.0 * 0.5f64.powi(k as i32)).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let ev = RatioEval::new(3.0, 4);
        let c = poisson_trial(0.6, 0.3, -0.4, 4);
        let e = ev.eval(&c);
        let h = 1e-6;
        for i in [0, 3, 4, 7] {
            let mut cp = c.clone();
            cp[i] += h;
            let mut cm = c.clone();
            cm[i] -= h;
            let d_re = (ev.ratio(&cp).ln() - ev.ratio(&cm).ln()) / (2.0 * h);
            let mut cp = c.clone();
            cp[i] += Complex64::new(0.0, h);
            let mut cm = c.clone();
            cm[i] -= Complex64::new(0.0, h);
            let d_im = (ev.ratio(&cp).ln() - ev.ratio(&cm).ln()) / (2.0 * h);
            // dJ/d conj(c) = (dJ/dx + i dJ/dy) / 2
            let expect = Complex64::new(d_re, d_im) * 0.5;
            assert!((e.grad[i] - expect).norm() < 1e-7, "{i}: {} vs {expect}", e.grad[i]);
        }
    }

    #[test]
    fn p_four_is_bounded_by_constant() {
        let s = riesz_search(4.0, 32, 20, 3).unwrap();
        assert!(s.value >= 1.0 && s.value <= riesz_constant(4.0) + 1e-6, "{s:?}");
        assert!(s.value >= s.family_best && s.family_best > s.random_best);
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(riesz_norm_empirical(1.0, 4, 1, 0).is_err());
        assert!(riesz_norm_empirical(f64::INFINITY, 4, 1, 0).is_err());
    }
}
