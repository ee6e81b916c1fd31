use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::covariance::{check_square_symmetric, nearest_psd, symmetrize};
use super::Component;
use crate::error::{Error, Result};

/// Multivariate normal distribution with a cached lower Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_norm: f64,
}

impl Gaussian {
    /// Builds a Gaussian from a symmetric positive-definite covariance.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        check_square_symmetric(&cov)?;
        if cov.nrows() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: cov.nrows(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mean vector"));
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .unpack();
        Ok(Self::from_parts(mean, cov, chol))
    }

    /// Like [`Gaussian::new`], but symmetrizes the candidate covariance and,
    /// when the Cholesky factorization fails, retries once with the nearest
    /// PSD matrix.
    pub fn with_repair(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let cov = symmetrize(&cov);
        match Self::new(mean.clone(), cov.clone()) {
            Err(Error::NotPositiveDefinite) => Self::new(mean, nearest_psd(&cov)?),
            other => other,
        }
    }

    /// Isotropic Gaussian `N(mean, variance * I)`.
    pub fn isotropic(mean: DVector<f64>, variance: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, DMatrix::identity(d, d) * variance)
    }

    pub fn standard(dim: usize) -> Self {
        Self::isotropic(DVector::zeros(dim), 1.0).expect("identity covariance is valid")
    }

    fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>, chol: DMatrix<f64>) -> Self {
        let d = mean.len() as f64;
        let log_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let log_norm = -0.5 * d * (2.0 * PI).ln() - 0.5 * log_det;
        Self {
            mean,
            cov,
            chol,
            log_norm,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower-triangular factor `L` with `L Lᵀ = cov`.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        -2.0 * (self.log_norm + 0.5 * self.dim() as f64 * (2.0 * PI).ln())
    }

    /// `(x - mean)ᵀ cov⁻¹ (x - mean)`.
    pub fn mahalanobis_sq(&self, x: &DVector<f64>) -> f64 {
        mahalanobis_sq(&self.chol, &self.mean, x)
    }

    /// `log N(x | mean, cov)`.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.ln_density(x))
    }

    /// `mean + sqrt(scale) * L z` with `z` standard normal.
    pub fn sample_scaled<R: Rng + ?Sized>(&self, scale: f64, rng: &mut R) -> DVector<f64> {
        let z = standard_normal_vector(self.dim(), rng);
        &self.mean + (&self.chol * z) * scale.sqrt()
    }
}

impl Component for Gaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    fn shape_matrix(&self) -> &DMatrix<f64> {
        &self.cov
    }

    fn dof(&self) -> Option<f64> {
        None
    }

    fn ln_density(&self, x: &DVector<f64>) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis_sq(x)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = standard_normal_vector(self.dim(), rng);
        &self.mean + &self.chol * z
    }

    fn sample_auxiliary<R: Rng + ?Sized>(&self, _x: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        self.sample(rng)
    }
}

pub(crate) fn standard_normal_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| StandardNormal.sample(rng))
}

pub(crate) fn mahalanobis_sq(chol: &DMatrix<f64>, mean: &DVector<f64>, x: &DVector<f64>) -> f64 {
    debug_assert_eq!(x.len(), mean.len());
    // forward substitution L y = x - mean
    let n = mean.len();
    let mut y = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        let mut s = x[i] - mean[i];
        for (j, yj) in y.iter().enumerate().take(i) {
            s -= chol[(i, j)] * yj;
        }
        y[i] = s / chol[(i, i)];
        acc += y[i] * y[i];
    }
    acc
}
