use nalgebra::DVector;

use super::all_finite;
use crate::distributions::{Gaussian, MixtureModel};
use crate::samplers::TargetDensity;

/// Equal-weight mixture of four `N(μ_i, 10 I₂)` with means (25,50), (5,5),
/// (50,5) and (50,50).
#[derive(Debug, Clone)]
pub struct GaussMixTarget {
    mixture: MixtureModel<Gaussian>,
}

impl GaussMixTarget {
    pub const MEANS: [[f64; 2]; 4] = [[25.0, 50.0], [5.0, 5.0], [50.0, 5.0], [50.0, 50.0]];
    pub const VARIANCE: f64 = 10.0;

    pub fn new() -> Self {
        let components = Self::MEANS
            .iter()
            .map(|m| {
                Gaussian::isotropic(DVector::from_row_slice(m), Self::VARIANCE)
                    .expect("positive variance")
            })
            .collect();
        Self {
            mixture: MixtureModel::new(vec![0.25; 4], components).expect("valid mixture"),
        }
    }

    pub fn mixture(&self) -> &MixtureModel<Gaussian> {
        &self.mixture
    }

    pub fn mode_centers() -> Vec<DVector<f64>> {
        Self::MEANS
            .iter()
            .map(|m| DVector::from_row_slice(m))
            .collect()
    }
}

impl Default for GaussMixTarget {
    fn default() -> Self {
        Self::new()
    }
}

impl TargetDensity for GaussMixTarget {
    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        if x.len() != 2 || !all_finite(x) {
            return f64::NEG_INFINITY;
        }
        self.mixture.ln_density(x)
    }
}
