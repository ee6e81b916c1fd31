use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};

/// Inverse-gamma distribution with shape `alpha` and rate `beta`; density
/// proportional to `s^(-alpha-1) exp(-beta / s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseGamma {
    alpha: f64,
    beta: f64,
}

impl InverseGamma {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(
                "alpha",
                format!("must be positive, got {alpha}"),
            ));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(
                "beta",
                format!("must be positive, got {beta}"),
            ));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // 1/s ~ Gamma(shape = alpha, scale = 1/beta)
        let gamma = Gamma::new(self.alpha, 1.0 / self.beta).expect("validated parameters");
        loop {
            let g: f64 = gamma.sample(rng);
            if g > 0.0 {
                return 1.0 / g;
            }
        }
    }
}
