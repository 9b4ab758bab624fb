//! Numerical laboratory for the matrix-valued `H^p` corona problem on the
//! unit disk and the polydisk.
//!
//! The crate builds analytic solutions `f` of `F f = g` for matrix-valued
//! polynomial corona data by minimum-norm block-Toeplitz solving, and checks
//! the pointwise identities, subharmonic potentials, embedding inequalities,
//! Hardy-space decompositions and explicit norm bounds that underpin the
//! estimate
//!
//! ```text
//! ||f||_p <= ( C / delta^(r+1) * log(1 / delta^(2r)) + 1 / delta ) ||g||_p,
//! C = sqrt(1 + e^2) + sqrt(e) + sqrt(2) e.
//! ```

// NaN must fail range checks, so `!(x >= a)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hardy;
pub mod instance;
pub mod linalg;
pub mod matpoly;
pub mod pointwise;
pub mod potential;
pub mod quad;
pub mod solver;
pub mod suite;

pub use error::{CoronaError, Result};
pub use hardy::{FourierTensor, OuterFunction};
pub use instance::{generate_instance, GenerateSpec, InstanceFile};
pub use matpoly::{MatPoly, MultiIndex, PointValue};
pub use pointwise::CoronaInstance;
pub use quad::DiskQuadrature;
pub use solver::{BoundReport, SolveResult};

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;

/// Complex matrix used for all pointwise values.
pub type CMat = DMatrix<Complex64>;
/// Complex column vector.
pub type CVec = DVector<Complex64>;
