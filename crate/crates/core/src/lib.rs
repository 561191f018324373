//! Numerical toolkit for the stable self-similar blowup of the corotational
//! harmonic map heat flow from ℝ³ into S³.
//!
//! The crate is organised bottom-up:
//!
//! * [`radial`] radial grids, radial functions and the five-dimensional
//!   radial calculus (Laplacian, dilation generator, weighted products, norms).
//! * [`profile`] the shrinking self-similar profile `f₀` by shooting.
//! * [`spectrum`] the linearized operator around `f₀` and its eigenpairs.
//! * [`evolution`] the perturbation equation in similarity variables and the
//!   one-parameter tuning of the blowup time.
//! * [`blowup`] direct integration of the physical flow and blowup-rate fits.
//! * [`verify`] a self-contained invariant suite used by the CLI.
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod blowup;
pub mod error;
pub mod evolution;
pub mod fit;
pub mod imex;
pub mod ode;
pub mod profile;
pub mod radial;
pub mod spectrum;
pub mod verify;

pub use error::{Error, Result};
pub use radial::{Parity, RadialFunction, RadialGrid};

/// Area of the unit sphere S⁴ ⊂ ℝ⁵.
pub const SPHERE_AREA: f64 = 8.0 * std::f64::consts::PI * std::f64::consts::PI / 3.0;
