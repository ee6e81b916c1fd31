//! One-step transition kernels.
//!
//! Every kernel is a pure function of `(state, parameters, rng)`; mixtures
//! passed in are read-only snapshots.

mod ellipse;
mod ess;
mod mh;
mod regional;

use nalgebra::DVector;

use crate::distributions::{Component, Gaussian};

pub use ellipse::MAX_SHRINK_ITERS;
pub use ess::ess_step;
pub use mh::{mh_step, regional_mh_step};
pub use regional::{gmrgess_step, regional_ess_step, residual_log_ratio, tmrgess_step};

/// Current position of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub point: DVector<f64>,
    /// Region of `point` under the active mixture (0 when no mixture is used).
    pub region: usize,
    pub rejections_last_step: usize,
    pub rng_seed: u64,
}

impl ChainState {
    pub fn new(point: DVector<f64>, rng_seed: u64) -> Self {
        Self {
            point,
            region: 0,
            rejections_last_step: 0,
            rng_seed,
        }
    }

    pub(crate) fn advance(&self, point: DVector<f64>, region: usize, rejections: usize) -> Self {
        Self {
            point,
            region,
            rejections_last_step: rejections,
            rng_seed: self.rng_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: ChainState,
    /// Rejected proposals before acceptance (ESS family), or 1/0 for a
    /// rejected/accepted Metropolis proposal.
    pub rejections: usize,
    /// Final ellipse angle, for the ESS family.
    pub angle: Option<f64>,
}

/// An evaluable, possibly unnormalized, log target density over `R^D`.
pub trait TargetDensity: Send + Sync {
    fn dim(&self) -> usize;

    /// `log π(x)`; may be `-inf` outside the support.
    fn log_density(&self, x: &DVector<f64>) -> f64;

    /// Gaussian prior factor, for targets of the form `L(x) N(x; μ, Σ)`.
    fn gaussian_prior(&self) -> Option<&Gaussian> {
        None
    }

    /// `log L(x)`, the target with the Gaussian prior factored out.
    fn log_likelihood(&self, x: &DVector<f64>) -> f64 {
        match self.gaussian_prior() {
            Some(prior) => self.log_density(x) - prior.ln_density(x),
            None => self.log_density(x),
        }
    }
}

impl<T: TargetDensity + ?Sized> TargetDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        (**self).log_density(x)
    }

    fn gaussian_prior(&self) -> Option<&Gaussian> {
        (**self).gaussian_prior()
    }

    fn log_likelihood(&self, x: &DVector<f64>) -> f64 {
        (**self).log_likelihood(x)
    }
}

/// Target defined by a closure.
pub struct FnTarget<F> {
    dim: usize,
    log_density: F,
}

impl<F> FnTarget<F>
where
    F: Fn(&DVector<f64>) -> f64 + Send + Sync,
{
    pub fn new(dim: usize, log_density: F) -> Self {
        Self { dim, log_density }
    }
}

impl<F> TargetDensity for FnTarget<F>
where
    F: Fn(&DVector<f64>) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        (self.log_density)(x)
    }
}

/// Target `L(x) N(x; μ, Σ)` with an explicit prior/likelihood split.
pub struct LatentGaussianTarget<F> {
    prior: Gaussian,
    log_likelihood: F,
}

impl<F> LatentGaussianTarget<F>
where
    F: Fn(&DVector<f64>) -> f64 + Send + Sync,
{
    pub fn new(prior: Gaussian, log_likelihood: F) -> Self {
        Self {
            prior,
            log_likelihood,
        }
    }
}

impl<F> TargetDensity for LatentGaussianTarget<F>
where
    F: Fn(&DVector<f64>) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        (self.log_likelihood)(x) + self.prior.ln_density(x)
    }

    fn gaussian_prior(&self) -> Option<&Gaussian> {
        Some(&self.prior)
    }

    fn log_likelihood(&self, x: &DVector<f64>) -> f64 {
        (self.log_likelihood)(x)
    }
}
