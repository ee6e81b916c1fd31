use nalgebra::{DMatrix, DVector};

use crate::distributions::{symmetrize, Gaussian, MixtureModel};
use crate::error::{Error, Result};
use crate::math::log_sum_exp;

/// Lower clip applied to SA weights before renormalising.
pub const SA_WEIGHT_FLOOR: f64 = 1e-6;

/// Raw stochastic-approximation direction at the current parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SaDirection {
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct SaUpdate {
    pub mixture: MixtureModel<Gaussian>,
    /// True when the update was non-finite and `current` was returned.
    pub skipped: bool,
}

/// Update direction for KL(π ‖ f) estimated from `samples`:
///
/// - weights: `Δw_j = mean_k a_kj - mean_{k,m} a_km` with `a_kj = N_j(x_k) / f(x_k)`
/// - means: `Δμ_j = mean_k γ_kj Σ_j⁻¹ (x_k - μ_j)`
/// - covariances: `ΔΣ_j = mean_k γ_kj [(x_k - μ_j)(x_k - μ_j)ᵀ - Σ_j]`
///
/// where `γ_kj = w_j a_kj` is the responsibility.
pub fn sa_gmm_direction(
    current: &MixtureModel<Gaussian>,
    samples: &[DVector<f64>],
) -> Result<SaDirection> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let m = current.len();
    let d = current.dim();
    let k = samples.len() as f64;
    let mut dw = vec![0.0; m];
    let mut dmu = vec![DVector::zeros(d); m];
    let mut dcov = vec![DMatrix::zeros(d, d); m];
    for x in samples {
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        let log_n = current.component_log_densities(x);
        let log_wn: Vec<f64> = log_n
            .iter()
            .zip(current.log_weights())
            .map(|(a, b)| a + b)
            .collect();
        let log_f = log_sum_exp(&log_wn);
        for j in 0..m {
            let g = current.component(j);
            let a = (log_n[j] - log_f).exp();
            let gamma = (log_wn[j] - log_f).exp();
            dw[j] += a;
            let c = x - g.mean();
            let solved = g
                .chol()
                .solve_lower_triangular(&c)
                .and_then(|y| g.chol().transpose().solve_upper_triangular(&y))
                .ok_or(Error::NotPositiveDefinite)?;
            dmu[j].axpy(gamma, &solved, 1.0);
            dcov[j].ger(gamma, &c, &c, 1.0);
            dcov[j] -= g.cov() * gamma;
        }
    }
    let mean_a = dw.iter().sum::<f64>() / m as f64;
    Ok(SaDirection {
        weights: dw.iter().map(|a| (a - mean_a) / k).collect(),
        means: dmu.into_iter().map(|v| v / k).collect(),
        covs: dcov.into_iter().map(|c| c / k).collect(),
    })
}

/// One SA step `φ + r_n Δφ`. Weights are clipped to `[SA_WEIGHT_FLOOR, 1]`
/// and renormalised; covariances are symmetrised and repaired to PSD when
/// Cholesky fails. No regularisation is added here.
pub fn sa_gmm_update(
    current: &MixtureModel<Gaussian>,
    samples: &[DVector<f64>],
    r_n: f64,
) -> Result<SaUpdate> {
    if !(r_n > 0.0 && r_n.is_finite()) {
        return Err(Error::invalid("r_n", "must be finite and > 0"));
    }
    let skip = || SaUpdate {
        mixture: current.clone(),
        skipped: true,
    };
    let dir = sa_gmm_direction(current, samples)?;
    let raw_w: Vec<f64> = current
        .weights()
        .iter()
        .zip(&dir.weights)
        .map(|(w, dw)| w + r_n * dw)
        .collect();
    let means: Vec<DVector<f64>> = current
        .components()
        .iter()
        .zip(&dir.means)
        .map(|(g, dm)| g.mean() + dm * r_n)
        .collect();
    let covs: Vec<DMatrix<f64>> = current
        .components()
        .iter()
        .zip(&dir.covs)
        .map(|(g, dc)| symmetrize(&(g.cov() + dc * r_n)))
        .collect();
    let finite = raw_w.iter().all(|v| v.is_finite())
        && means.iter().all(|v| v.iter().all(|x| x.is_finite()))
        && covs.iter().all(|c| c.iter().all(|x| x.is_finite()));
    if !finite {
        return Ok(skip());
    }
    let clipped: Vec<f64> = raw_w
        .iter()
        .map(|w| w.clamp(SA_WEIGHT_FLOOR, 1.0))
        .collect();
    let total: f64 = clipped.iter().sum();
    let weights = clipped.iter().map(|w| w / total).collect();
    let components = match means
        .into_iter()
        .zip(covs)
        .map(|(mu, c)| Gaussian::with_repair(mu, c))
        .collect::<Result<Vec<_>>>()
    {
        Ok(c) => c,
        Err(_) => return Ok(skip()),
    };
    let mixture =
        MixtureModel::new(weights, components)?.with_weighted_regions(current.weighted_regions());
    Ok(SaUpdate {
        mixture,
        skipped: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_of_single_component() {
        let mu = DVector::from_vec(vec![1.0, -2.0]);
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let current = MixtureModel::single(Gaussian::new(mu.clone(), cov.clone()).unwrap());
        let samples = vec![mu.clone(); 7];
        let r = 0.2;
        let out = sa_gmm_update(&current, &samples, r).unwrap();
        assert!(!out.skipped);
        let g = out.mixture.component(0);
        assert!((g.mean() - &mu).norm() < 1e-14);
        assert!((g.cov() - cov * (1.0 - r)).norm() < 1e-12);
        assert_eq!(out.mixture.weights(), &[1.0]);
        let dir = sa_gmm_direction(&current, &samples).unwrap();
        assert!(dir.weights[0].abs() < 1e-15);
    }

    #[test]
    fn weights_stay_on_simplex() {
        let current = MixtureModel::new(
            vec![0.999, 0.001],
            vec![
                Gaussian::isotropic(DVector::from_vec(vec![0.0]), 1.0).unwrap(),
                Gaussian::isotropic(DVector::from_vec(vec![50.0]), 1.0).unwrap(),
            ],
        )
        .unwrap();
        let samples = vec![DVector::from_vec(vec![0.1]); 4];
        let out = sa_gmm_update(&current, &samples, 5.0).unwrap();
        let w = out.mixture.weights();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&v| v >= SA_WEIGHT_FLOOR * 0.5));
    }

    #[test]
    fn rejects_bad_rate() {
        let current = MixtureModel::single(Gaussian::standard(1));
        let samples = vec![DVector::zeros(1)];
        assert!(sa_gmm_update(&current, &samples, 0.0).is_err());
    }
}
