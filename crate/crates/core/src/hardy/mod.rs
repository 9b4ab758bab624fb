//! Truncated Fourier analysis on the torus: Riesz projections, the
//! one-variable splittings of `(H^2)^perp` and of `K = Pi L^2 ⊖ (H^2 ∩ Pi L^2)`,
//! outer functions with the `H^p` multiplier pairs, and empirical Riesz
//! projection norms.

mod decompose;
mod outer;
mod riesz;
mod tensor;

pub use decompose::{
    decompose_hperp, decompose_k, project_h2, project_kj, project_qj, riesz_project, BundleGrid, Half, KDecomposition, Projection,
    INVARIANCE_TOL,
};
pub use outer::{circle_points, hp_multiplier_pair, outer_function, MultiplierPair, MultiplierReport, OuterFunction, MODULUS_FLOOR};
pub use riesz::{riesz_norm_empirical, riesz_ratio, riesz_search, RieszSearch, ASCENT_STEPS};
pub use tensor::{lq_mean, FourierTensor, TorusGrid};

/// Norm of the Riesz projection on `L^p(T)`, `1 / sin(pi / p)`.
pub fn riesz_constant(p: f64) -> f64 {
    1.0 / (std::f64::consts::PI / p).sin()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riesz_constant_values() {
        assert!((riesz_constant(2.0) - 1.0).abs() < 1e-15);
        assert!((riesz_constant(4.0) - 2f64.sqrt()).abs() < 1e-14);
        assert!((riesz_constant(4.0 / 3.0) - 2f64.sqrt()).abs() < 1e-14);
    }
}
