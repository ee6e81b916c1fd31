use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::all_finite;
use crate::distributions::{Component, Gaussian};
use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus};
use crate::samplers::TargetDensity;

/// Standardised train/test split for binary classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train_x: DMatrix<f64>,
    pub train_y: Vec<u8>,
    pub test_x: DMatrix<f64>,
    pub test_y: Vec<u8>,
    /// Per-feature training mean used for standardisation.
    pub feature_mean: DVector<f64>,
    /// Per-feature training standard deviation (1 for constant columns).
    pub feature_sd: DVector<f64>,
}

impl Dataset {
    /// Splits rows `0..n_train` into the training set and the rest into the
    /// test set, then standardises both with training statistics.
    pub fn from_rows(features: &[Vec<f64>], labels: &[u8], n_train: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                got: labels.len(),
            });
        }
        if n_train == 0 || n_train > features.len() {
            return Err(Error::invalid("n_train", "must be in 1..=rows"));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::invalid("labels", "must be 0 or 1"));
        }
        let d = features[0].len();
        if features.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("features", "ragged rows"));
        }
        let n = n_train as f64;
        let mean = DVector::from_fn(d, |j, _| {
            features[..n_train].iter().map(|r| r[j]).sum::<f64>() / n
        });
        let sd = DVector::from_fn(d, |j, _| {
            let var = features[..n_train]
                .iter()
                .map(|r| (r[j] - mean[j]).powi(2))
                .sum::<f64>()
                / n;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        });
        let standardize = |rows: &[Vec<f64>]| {
            DMatrix::from_fn(rows.len(), d, |i, j| (rows[i][j] - mean[j]) / sd[j])
        };
        Ok(Self {
            train_x: standardize(&features[..n_train]),
            train_y: labels[..n_train].to_vec(),
            test_x: standardize(&features[n_train..]),
            test_y: labels[n_train..].to_vec(),
            feature_mean: mean,
            feature_sd: sd,
        })
    }

    pub fn dim(&self) -> usize {
        self.train_x.ncols()
    }
}

/// Logistic regression log-likelihood over a design matrix, optionally
/// multiplied by a Gaussian prior.
#[derive(Debug, Clone)]
pub struct LogisticTarget {
    design: DMatrix<f64>,
    labels: Vec<f64>,
    prior: Option<Gaussian>,
}

impl LogisticTarget {
    pub fn new(design: DMatrix<f64>, labels: &[u8]) -> Result<Self> {
        if design.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: design.nrows(),
                got: labels.len(),
            });
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::invalid("labels", "must be 0 or 1"));
        }
        Ok(Self {
            design,
            labels: labels.iter().map(|&y| y as f64).collect(),
            prior: None,
        })
    }

    pub fn from_training(data: &Dataset) -> Result<Self> {
        Self::new(data.train_x.clone(), &data.train_y)
    }

    pub fn with_prior(mut self, prior: Gaussian) -> Result<Self> {
        if prior.dim() != self.design.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.design.ncols(),
                got: prior.dim(),
            });
        }
        self.prior = Some(prior);
        Ok(self)
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    /// `Σ_n y_n log p_n + (1 - y_n) log(1 - p_n)` with `p_n = σ(β·x_n)`,
    /// evaluated as `y z - softplus(z)`.
    pub fn log_likelihood_at(&self, beta: &DVector<f64>) -> f64 {
        let z = &self.design * beta;
        z.iter()
            .zip(&self.labels)
            .map(|(&z, &y)| y * z - softplus(z))
            .sum()
    }

    /// Gradient of [`LogisticTarget::log_likelihood_at`].
    pub fn gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        let z = &self.design * beta;
        let resid = DVector::from_fn(z.len(), |i, _| self.labels[i] - sigmoid(z[i]));
        self.design.transpose() * resid
    }
}

impl TargetDensity for LogisticTarget {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        if x.len() != self.dim() || !all_finite(x) {
            return f64::NEG_INFINITY;
        }
        let ll = self.log_likelihood_at(x);
        match &self.prior {
            Some(p) => ll + p.ln_density(x),
            None => ll,
        }
    }

    fn gaussian_prior(&self) -> Option<&Gaussian> {
        self.prior.as_ref()
    }

    fn log_likelihood(&self, x: &DVector<f64>) -> f64 {
        if x.len() != self.dim() || !all_finite(x) {
            return f64::NEG_INFINITY;
        }
        self.log_likelihood_at(x)
    }
}

/// Simulated logistic data with known coefficients.
#[derive(Debug, Clone)]
pub struct SyntheticLogistic {
    pub data: Dataset,
    /// Coefficients on the raw (unstandardised) features.
    pub beta: DVector<f64>,
    /// Raw test features, for evaluating the true-coefficient classifier.
    pub raw_test_x: DMatrix<f64>,
}

/// Draws `n_train + n_test` rows with iid standard normal features and
/// labels `y ~ Bernoulli(σ(β·x))`.
pub fn synthetic_logistic(
    n_train: usize,
    n_test: usize,
    beta: &DVector<f64>,
    seed: u64,
) -> Result<SyntheticLogistic> {
    let d = beta.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_train + n_test;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let z: f64 = x.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
        labels.push(u8::from(rng.random::<f64>() < sigmoid(z)));
        rows.push(x);
    }
    // shuffle once so the split is not tied to generation order
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
    let labels: Vec<u8> = order.iter().map(|&i| labels[i]).collect();
    let data = Dataset::from_rows(&rows, &labels, n_train)?;
    let raw_test_x = DMatrix::from_fn(n_test, d, |i, j| rows[n_train + i][j]);
    Ok(SyntheticLogistic {
        data,
        beta: beta.clone(),
        raw_test_x,
    })
}
