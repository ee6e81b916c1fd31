//! Elliptical slice sampling with regional mixture pseudo-priors.
//!
//! The crate provides:
//!
//! * [`distributions`]: Gaussian, Student's t, inverse-gamma and mixture
//!   densities plus covariance hygiene.
//! * [`samplers`]: one-step transition kernels (ESS, the Gaussian- and
//!   t-mixture regional generalized ESS kernels, regional and random-walk MH).
//! * [`adaptation`]: mixture refitting by EM, variational Bayes and
//!   stochastic approximation.
//! * [`runner`]: the lockstep multi-chain driver with periodic adaption.
//! * [`targets`]: the built-in experiment targets and data loaders.
//! * [`diagnostics`]: rejection-rate series, accuracy, mode coverage and
//!   CSV trace persistence.

pub mod adaptation;
pub mod diagnostics;
pub mod distributions;
mod error;
pub mod math;
pub mod runner;
pub mod samplers;
pub mod targets;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};
