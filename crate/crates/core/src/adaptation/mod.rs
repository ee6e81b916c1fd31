//! Mixture fitting from pooled chain snapshots.

mod em_gmm;
mod em_tmm;
mod init;
mod sa_gmm;
mod vi_gmm;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::distributions::MixtureModel;
use crate::error::{Error, Result};

pub use em_gmm::em_gmm_fit;
pub use em_tmm::{dof_equation, em_tmm_fit, expected_precision, DOF_BOUNDS};
pub use init::kmeans_plus_plus;
pub use sa_gmm::{sa_gmm_direction, sa_gmm_update, SaDirection, SaUpdate, SA_WEIGHT_FLOOR};
pub use vi_gmm::vi_gmm_fit;

/// Responsibility mass below which a component is treated as empty.
pub const EMPTY_COMPONENT_MASS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    EmGmm,
    ViGmm,
    SaGmm,
    EmTmm,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::EmGmm, Scheme::ViGmm, Scheme::SaGmm, Scheme::EmTmm];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::EmGmm => "em_gmm",
            Scheme::ViGmm => "vi_gmm",
            Scheme::SaGmm => "sa_gmm",
            Scheme::EmTmm => "em_tmm",
        }
    }

    /// Whether the scheme produces Student's-t components.
    pub fn is_student_t(self) -> bool {
        matches!(self, Scheme::EmTmm)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown adaptation scheme `{s}`")))
    }
}

/// SA step size `r_n = c / (n0 + n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRate {
    pub c: f64,
    pub n0: f64,
}

impl LearningRate {
    pub fn rate(&self, n: usize) -> f64 {
        self.c / (self.n0 + n as f64)
    }
}

impl Default for LearningRate {
    fn default() -> Self {
        Self { c: 0.5, n0: 10.0 }
    }
}

/// Dirichlet / Normal-Wishart hyperparameters for variational fitting.
/// `None` fields take data-dependent defaults: `m0` the sample mean,
/// `w0 = I / D`, `nu0 = D + 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViHyperparams {
    pub alpha0: f64,
    pub beta0: f64,
    pub m0: Option<DVector<f64>>,
    pub w0: Option<DMatrix<f64>>,
    pub nu0: Option<f64>,
}

impl Default for ViHyperparams {
    fn default() -> Self {
        Self {
            alpha0: 1.0,
            beta0: 1.0,
            m0: None,
            w0: None,
            nu0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationConfig {
    pub scheme: Scheme,
    pub components: usize,
    /// Adaption period in iterations.
    pub interval: usize,
    /// `r` in `Σ + r I`, applied after every fit.
    pub reg_radius: f64,
    pub learning_rate: LearningRate,
    pub em_max_iters: usize,
    pub em_tol: f64,
    pub vi: ViHyperparams,
    /// Hold every t component at this dof instead of estimating it.
    pub fixed_dof: Option<f64>,
    /// Starting dof for t components when `fixed_dof` is unset.
    pub initial_dof: f64,
    /// Assign regions by `w_j f_j` instead of `f_j`.
    pub weighted_regions: bool,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::EmGmm,
            components: 1,
            interval: 20,
            reg_radius: 0.1,
            learning_rate: LearningRate::default(),
            em_max_iters: 200,
            em_tol: 1e-6,
            vi: ViHyperparams::default(),
            fixed_dof: None,
            initial_dof: 5.0,
            weighted_regions: false,
        }
    }
}

impl AdaptationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::invalid(
                "adaptation.components",
                "must be at least 1",
            ));
        }
        if self.interval == 0 {
            return Err(Error::invalid("adaptation.interval", "must be at least 1"));
        }
        if !(self.reg_radius >= 0.0 && self.reg_radius.is_finite()) {
            return Err(Error::invalid(
                "adaptation.reg_radius",
                "must be finite and >= 0",
            ));
        }
        if !(self.learning_rate.c > 0.0 && self.learning_rate.c.is_finite()) {
            return Err(Error::invalid("adaptation.learning_rate.c", "must be > 0"));
        }
        if !(self.learning_rate.n0 >= 1.0 && self.learning_rate.n0.is_finite()) {
            return Err(Error::invalid(
                "adaptation.learning_rate.n0",
                "must be >= 1",
            ));
        }
        if self.em_max_iters == 0 {
            return Err(Error::invalid(
                "adaptation.em_max_iters",
                "must be at least 1",
            ));
        }
        if !(self.em_tol > 0.0) {
            return Err(Error::invalid("adaptation.em_tol", "must be > 0"));
        }
        if !(self.vi.alpha0 > 0.0 && self.vi.beta0 > 0.0) {
            return Err(Error::invalid(
                "adaptation.vi",
                "alpha0 and beta0 must be > 0",
            ));
        }
        if let Some(nu) = self.fixed_dof {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Error::invalid(
                    "adaptation.fixed_dof",
                    "must be finite and > 0",
                ));
            }
        }
        if !(self.initial_dof > 0.0 && self.initial_dof.is_finite()) {
            return Err(Error::invalid(
                "adaptation.initial_dof",
                "must be finite and > 0",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult<C> {
    pub mixture: MixtureModel<C>,
    pub converged: bool,
    pub iterations_used: usize,
    /// Final log-likelihood (EM) or evidence lower bound (VI).
    pub objective: f64,
    /// Objective after every iteration, in order.
    pub objective_trace: Vec<f64>,
    /// Components re-seeded after losing all responsibility mass.
    pub reseeded: usize,
    /// Dof updates that failed and kept the previous value (t mixtures).
    pub dof_failures: usize,
}

pub(crate) fn check_samples(samples: &[DVector<f64>], m: usize) -> Result<usize> {
    if m == 0 {
        return Err(Error::invalid("components", "must be at least 1"));
    }
    if samples.len() < m {
        return Err(Error::TooFewSamples {
            needed: m,
            got: samples.len(),
        });
    }
    let d = samples[0].len();
    if d == 0 {
        return Err(Error::invalid("samples", "zero-dimensional points"));
    }
    for s in samples {
        if s.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: s.len(),
            });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample"));
        }
    }
    Ok(d)
}

pub(crate) fn all_identical(samples: &[DVector<f64>]) -> bool {
    samples.iter().all(|s| s == &samples[0])
}

pub(crate) fn sample_mean(samples: &[DVector<f64>]) -> DVector<f64> {
    let mut mean = DVector::zeros(samples[0].len());
    for s in samples {
        mean += s;
    }
    mean / samples.len() as f64
}

/// Population (MLE) covariance.
pub(crate) fn sample_cov(samples: &[DVector<f64>], mean: &DVector<f64>) -> DMatrix<f64> {
    let d = mean.len();
    let mut cov = DMatrix::zeros(d, d);
    for s in samples {
        let c = s - mean;
        cov.ger(1.0, &c, &c, 1.0);
    }
    cov / samples.len() as f64
}

/// Variance used for degenerate or re-seeded components.
pub(crate) fn fallback_variance(reg_radius: f64) -> f64 {
    reg_radius.max(1e-6)
}

/// Largest absolute entry difference between two parameter lists.
pub(crate) fn max_abs_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
