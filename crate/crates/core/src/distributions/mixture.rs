use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};

use super::{Component, Gaussian, StudentT};
use crate::error::{Error, Result};
use crate::math::log_sum_exp;

/// Tolerance on `sum(weights) == 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-10;

/// Finite mixture of homogeneous components. Each component doubles as the
/// pseudo-prior of its region: the set of points where its density is the
/// largest among all components.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel<C> {
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    components: Vec<C>,
    weighted_regions: bool,
}

impl<C: Component> MixtureModel<C> {
    pub fn new(weights: Vec<f64>, components: Vec<C>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid(
                "components",
                "a mixture needs at least one component",
            ));
        }
        if weights.len() != components.len() {
            return Err(Error::DimensionMismatch {
                expected: components.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights", "must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(
                "weights",
                format!("sum to {total}, expected 1"),
            ));
        }
        let dim = components[0].dim();
        if let Some(bad) = components.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.dim(),
            });
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self {
            weights,
            log_weights,
            components,
            weighted_regions: false,
        })
    }

    /// Single-component mixture.
    pub fn single(component: C) -> Self {
        Self::new(vec![1.0], vec![component]).expect("one component with unit weight")
    }

    /// Assign regions by `argmax_j w_j f_j(x)` instead of `argmax_j f_j(x)`.
    pub fn with_weighted_regions(mut self, weighted: bool) -> Self {
        self.weighted_regions = weighted;
        self
    }

    pub fn weighted_regions(&self) -> bool {
        self.weighted_regions
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn components(&self) -> &[C] {
        &self.components
    }

    pub fn component(&self, index: usize) -> &C {
        &self.components[index]
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `log f_j(x)` for every component, unweighted.
    pub fn component_log_densities(&self, x: &DVector<f64>) -> Vec<f64> {
        self.components.iter().map(|c| c.ln_density(x)).collect()
    }

    /// `log sum_j w_j f_j(x)`.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.ln_density(x))
    }

    pub(crate) fn ln_density(&self, x: &DVector<f64>) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| lw + c.ln_density(x))
            .collect();
        log_sum_exp(&terms)
    }

    /// Region index of `x`; ties go to the lowest index.
    pub fn region(&self, x: &DVector<f64>) -> usize {
        self.region_from_log_densities(&self.component_log_densities(x))
    }

    /// Region index given precomputed unweighted component log densities.
    pub fn region_from_log_densities(&self, log_f: &[f64]) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (j, lf) in log_f.iter().enumerate() {
            let score = if self.weighted_regions {
                lf + self.log_weights[j]
            } else {
                *lf
            };
            // strict comparison keeps the lowest index on ties
            if score > best_score {
                best = j;
                best_score = score;
            }
        }
        best
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.len() - 1;
        for (j, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                pick = j;
                break;
            }
        }
        self.components[pick].sample(rng)
    }
}

/// A fitted pseudo-prior bank of either component family.
#[derive(Debug, Clone, PartialEq)]
pub enum Mixture {
    Gaussian(MixtureModel<Gaussian>),
    StudentT(MixtureModel<StudentT>),
}

impl Mixture {
    pub fn len(&self) -> usize {
        match self {
            Mixture::Gaussian(m) => m.len(),
            Mixture::StudentT(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            Mixture::Gaussian(m) => m.dim(),
            Mixture::StudentT(m) => m.dim(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        match self {
            Mixture::Gaussian(m) => m.weights(),
            Mixture::StudentT(m) => m.weights(),
        }
    }

    pub fn mean(&self, j: usize) -> &DVector<f64> {
        match self {
            Mixture::Gaussian(m) => m.component(j).mean(),
            Mixture::StudentT(m) => m.component(j).mean(),
        }
    }

    /// Covariance for Gaussian components, scale matrix for Student's t.
    pub fn shape_matrix(&self, j: usize) -> &DMatrix<f64> {
        match self {
            Mixture::Gaussian(m) => m.component(j).cov(),
            Mixture::StudentT(m) => m.component(j).scale(),
        }
    }

    pub fn dof(&self, j: usize) -> Option<f64> {
        match self {
            Mixture::Gaussian(_) => None,
            Mixture::StudentT(m) => Some(m.component(j).dof()),
        }
    }

    pub fn region(&self, x: &DVector<f64>) -> usize {
        match self {
            Mixture::Gaussian(m) => m.region(x),
            Mixture::StudentT(m) => m.region(x),
        }
    }

    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        match self {
            Mixture::Gaussian(m) => m.log_density(x),
            Mixture::StudentT(m) => m.log_density(x),
        }
    }
}
