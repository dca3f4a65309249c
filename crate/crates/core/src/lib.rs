//! Riemann–Liouville fractional calculus on uniform time grids, Liouville
//! fractional Brownian motion, stochastic integrals of deterministic
//! (operator-valued) integrands and spectral-Galerkin mild solutions of
//! parabolic equations driven by space-time noise that is white in space and
//! Liouville-fractional in time.
//!
//! Every stochastic quantity in this crate comes with a deterministic oracle:
//! sampled paths are checked against covariance kernels, pathwise integrals
//! against transform norms, and per-mode stochastic convolutions against
//! their exact variances.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cylindrical;
pub mod error;
pub mod fbm;
pub mod frac_calc;
pub mod grid;
pub mod io;
pub mod numerics;
pub mod seed;
pub mod spde;
pub mod stoch_integral;
pub mod svg;

pub use error::{Error, Result};
pub use fbm::{CovKind, CovMatrix, HurstOrder, PathEnsemble, Scheme};
pub use frac_calc::FracKernelMatrix;
pub use grid::{NodeValues, Side, StepFunction, TimeGrid};
pub use stoch_integral::{IntegrandTransform, McEstimate, Regime};
