//! Green's functions of a planar diffusion whose covariance and drift switch
//! across the horizontal axis, with a singular skew drift on the axis.
//!
//! Modules are layered bottom-up: [`model`] holds validated parameters and
//! kernels, [`algebra`] the branch geometry, [`laplace`] the explicit transforms,
//! [`asymptotics`] every asymptotic formula, [`harmonic`] the Martin kernels and
//! their checks, [`oracle`] numerical inversion, and [`montecarlo`] path
//! simulation. [`cli`] wires them into the `layered-green` binary.

pub mod algebra;
pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod harmonic;
pub mod laplace;
pub mod model;
pub mod montecarlo;
pub mod oracle;
pub mod quad;
mod selftest;

pub use error::{Error, Result};
pub use model::{CovMatrix, Drift, Half, ModelParams, Point, SkewVector, C64};
