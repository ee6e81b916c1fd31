//! Densities, samplers and covariance hygiene for the pseudo-prior families.

mod covariance;
mod gaussian;
mod inverse_gamma;
mod mixture;
mod student_t;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub use covariance::{nearest_psd, regularize_cov, symmetrize, PSD_JITTER, SYMMETRY_TOL};
pub use gaussian::Gaussian;
pub use inverse_gamma::InverseGamma;
pub use mixture::{Mixture, MixtureModel, WEIGHT_SUM_TOL};
pub use student_t::StudentT;

/// A mixture component usable as a regional pseudo-prior.
pub trait Component: Clone + Send + Sync + std::fmt::Debug {
    fn dim(&self) -> usize;

    fn mean(&self) -> &DVector<f64>;

    /// Covariance for a Gaussian, scale matrix for a Student's t.
    fn shape_matrix(&self) -> &DMatrix<f64>;

    fn dof(&self) -> Option<f64>;

    /// Log density; `x` must have dimension `self.dim()`.
    fn ln_density(&self, x: &DVector<f64>) -> f64;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64>;

    /// Draw the auxiliary point that, together with the current state `x`,
    /// spans the ellipse of a generalized elliptical slice step.
    fn sample_auxiliary<R: Rng + ?Sized>(&self, x: &DVector<f64>, rng: &mut R) -> DVector<f64>;
}
