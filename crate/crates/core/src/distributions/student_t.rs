use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use statrs::function::gamma::ln_gamma;

use super::covariance::{check_square_symmetric, nearest_psd, symmetrize};
use super::gaussian::{mahalanobis_sq, standard_normal_vector};
use super::{Component, InverseGamma};
use crate::error::{Error, Result};

/// Multivariate Student's t distribution with location `mean`, scale matrix
/// `scale` and `dof` degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentT {
    mean: DVector<f64>,
    scale: DMatrix<f64>,
    chol: DMatrix<f64>,
    dof: f64,
    log_norm: f64,
}

impl StudentT {
    pub fn new(mean: DVector<f64>, scale: DMatrix<f64>, dof: f64) -> Result<Self> {
        if !(dof > 0.0) || dof.is_nan() {
            return Err(Error::invalid(
                "dof",
                format!("must be positive, got {dof}"),
            ));
        }
        check_square_symmetric(&scale)?;
        if scale.nrows() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: scale.nrows(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("location vector"));
        }
        let chol = scale
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .unpack();
        let d = mean.len() as f64;
        let log_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let log_norm = ln_gamma(0.5 * (dof + d))
            - ln_gamma(0.5 * dof)
            - 0.5 * d * (dof * PI).ln()
            - 0.5 * log_det;
        Ok(Self {
            mean,
            scale,
            chol,
            dof,
            log_norm,
        })
    }

    /// Symmetrizes the scale and falls back to the nearest PSD matrix once
    /// when the Cholesky factorization fails.
    pub fn with_repair(mean: DVector<f64>, scale: DMatrix<f64>, dof: f64) -> Result<Self> {
        let scale = symmetrize(&scale);
        match Self::new(mean.clone(), scale.clone(), dof) {
            Err(Error::NotPositiveDefinite) => Self::new(mean, nearest_psd(&scale)?, dof),
            other => other,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn scale(&self) -> &DMatrix<f64> {
        &self.scale
    }

    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn mahalanobis_sq(&self, x: &DVector<f64>) -> f64 {
        mahalanobis_sq(&self.chol, &self.mean, x)
    }

    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.ln_density(x))
    }

    /// Conditional law of the latent scale given a point `x`:
    /// `IG((D + ν)/2, (ν + (x-μ)ᵀΣ⁻¹(x-μ))/2)`.
    pub fn latent_scale_posterior(&self, x: &DVector<f64>) -> InverseGamma {
        let d = self.dim() as f64;
        let alpha = 0.5 * (d + self.dof);
        let beta = 0.5 * (self.dof + self.mahalanobis_sq(x));
        InverseGamma::new(alpha, beta).expect("dof > 0 keeps both parameters positive")
    }

    fn scaled_draw<R: Rng + ?Sized>(&self, s: f64, rng: &mut R) -> DVector<f64> {
        let z = standard_normal_vector(self.dim(), rng);
        &self.mean + (&self.chol * z) * s.sqrt()
    }
}

impl Component for StudentT {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    fn shape_matrix(&self) -> &DMatrix<f64> {
        &self.scale
    }

    fn dof(&self) -> Option<f64> {
        Some(self.dof)
    }

    fn ln_density(&self, x: &DVector<f64>) -> f64 {
        let d = self.dim() as f64;
        self.log_norm - 0.5 * (self.dof + d) * (self.mahalanobis_sq(x) / self.dof).ln_1p()
    }

    /// Scale-mixture draw: `s ~ IG(ν/2, ν/2)`, then `N(mean, s * scale)`.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let half = 0.5 * self.dof;
        let s = InverseGamma::new(half, half)
            .expect("positive dof")
            .sample(rng);
        self.scaled_draw(s, rng)
    }

    fn sample_auxiliary<R: Rng + ?Sized>(&self, x: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let s = self.latent_scale_posterior(x).sample(rng);
        self.scaled_draw(s, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Gaussian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t1(dof: f64) -> StudentT {
        StudentT::new(DVector::zeros(1), DMatrix::identity(1, 1), dof).unwrap()
    }

    #[test]
    fn cauchy_and_gaussian_limits() {
        let x0 = DVector::zeros(1);
        assert!((t1(1.0).log_density(&x0).unwrap() - (1.0 / PI).ln()).abs() < 1e-12);
        assert!((t1(1e6).log_density(&x0).unwrap() + 0.9189385).abs() < 1e-4);
    }

    #[test]
    fn unimodal_in_2d() {
        let t = StudentT::new(DVector::zeros(2), DMatrix::identity(2, 2), 4.0).unwrap();
        let at_mode = t.ln_density(&DVector::zeros(2));
        let away = t.ln_density(&DVector::from_element(2, 3.0));
        assert!(at_mode > away);
    }

    #[test]
    fn large_dof_matches_gaussian_on_grid() {
        for dim in [1usize, 2] {
            let t = StudentT::new(DVector::zeros(dim), DMatrix::identity(dim, dim), 1e6).unwrap();
            let g = Gaussian::standard(dim);
            for i in 0..100 {
                let a = -3.0 + 6.0 * (i as f64) / 99.0;
                let b = 3.0 - 6.0 * ((i * 37 % 100) as f64) / 99.0;
                let x = if dim == 1 {
                    DVector::from_vec(vec![a])
                } else {
                    DVector::from_vec(vec![a, b])
                };
                let diff = (t.ln_density(&x) - g.ln_density(&x)).abs();
                assert!(diff < 1e-4, "dim={dim} x={x:?} diff={diff}");
            }
        }
    }

    #[test]
    fn invalid_dof() {
        assert!(StudentT::new(DVector::zeros(1), DMatrix::identity(1, 1), 0.0).is_err());
        assert!(StudentT::new(DVector::zeros(1), DMatrix::identity(1, 1), f64::NAN).is_err());
    }

    #[test]
    fn latent_scale_parameters() {
        let t = StudentT::new(DVector::zeros(2), DMatrix::identity(2, 2), 4.0).unwrap();
        let ig = t.latent_scale_posterior(&DVector::zeros(2));
        assert_eq!(ig.beta(), 2.0);
        let ig = t.latent_scale_posterior(&DVector::from_vec(vec![1.0, 1.0]));
        assert_eq!((ig.alpha(), ig.beta()), (3.0, 3.0));
    }

    #[test]
    fn sample_moments_and_determinism() {
        let nu = 10.0;
        let t = t1(nu);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let mean = (0..n).map(|_| t.sample(&mut rng)[0]).sum::<f64>() / n as f64;
        let bound = 4.0 * (nu / ((nu - 2.0) * n as f64)).sqrt();
        assert!(mean.abs() < bound, "mean={mean}");

        let a = t.sample(&mut ChaCha8Rng::seed_from_u64(1));
        let b = t.sample(&mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
    }

    #[test]
    fn near_gaussian_quantile() {
        let t = t1(1e6);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut draws: Vec<f64> = (0..100_000).map(|_| t.sample(&mut rng)[0]).collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q95 = draws[95_000];
        let gauss_q95 = 1.6448536269514722;
        assert!((q95 - gauss_q95).abs() / gauss_q95 < 0.02, "q95={q95}");
    }
}
