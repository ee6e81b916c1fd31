use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};

use super::init::kmeans_plus_plus;
use super::{
    all_identical, check_samples, fallback_variance, max_abs_change, sample_cov, AdaptationConfig,
    FitResult, EMPTY_COMPONENT_MASS,
};
use crate::distributions::{regularize_cov, Component, Gaussian, MixtureModel};
use crate::error::Result;
use crate::math::log_sum_exp;

/// Responsibilities (row per sample) and the observed-data log-likelihood.
pub(crate) fn e_step<C: Component>(
    samples: &[DVector<f64>],
    weights: &[f64],
    components: &[C],
) -> (Vec<Vec<f64>>, f64) {
    let log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let mut total = 0.0;
    let resp = samples
        .iter()
        .map(|x| {
            let terms: Vec<f64> = components
                .iter()
                .zip(&log_w)
                .map(|(c, lw)| lw + c.ln_density(x))
                .collect();
            let norm = log_sum_exp(&terms);
            total += norm;
            terms.iter().map(|t| (t - norm).exp()).collect()
        })
        .collect();
    (resp, total)
}

pub(crate) fn flatten(weights: &[f64], means: &[DVector<f64>], covs: &[DMatrix<f64>]) -> Vec<f64> {
    let mut out = weights.to_vec();
    for m in means {
        out.extend(m.iter());
    }
    for c in covs {
        out.extend(c.iter());
    }
    out
}

/// Starting means (k-means++), shared covariance and uniform weights.
pub(crate) fn initial_parameters<R: Rng + ?Sized>(
    samples: &[DVector<f64>],
    m: usize,
    rng: &mut R,
) -> (Vec<f64>, Vec<DVector<f64>>, DMatrix<f64>) {
    let centers = kmeans_plus_plus(samples, m, rng);
    let means: Vec<DVector<f64>> = centers.iter().map(|&i| samples[i].clone()).collect();
    let mean = super::sample_mean(samples);
    (vec![1.0 / m as f64; m], means, sample_cov(samples, &mean))
}

/// Weighted mean and scatter for one component. `mean_weight[k]` weights the
/// location, `scatter_weight[k]` the outer products; the scatter is divided
/// by `norm`.
pub(crate) fn weighted_moments(
    samples: &[DVector<f64>],
    mean_weight: &[f64],
    scatter_weight: &[f64],
    norm: f64,
) -> (DVector<f64>, DMatrix<f64>) {
    let d = samples[0].len();
    let mut mean = DVector::zeros(d);
    let mut mass = 0.0;
    for (x, &w) in samples.iter().zip(mean_weight) {
        mean.axpy(w, x, 1.0);
        mass += w;
    }
    mean /= mass;
    let mut cov = DMatrix::zeros(d, d);
    for (x, &w) in samples.iter().zip(scatter_weight) {
        let c = x - &mean;
        cov.ger(w, &c, &c, 1.0);
    }
    (mean, cov / norm)
}

pub(crate) fn degenerate_gaussian(
    point: &DVector<f64>,
    m: usize,
    config: &AdaptationConfig,
) -> Result<FitResult<Gaussian>> {
    let g = Gaussian::isotropic(point.clone(), fallback_variance(config.reg_radius))?;
    let mixture = MixtureModel::new(vec![1.0 / m as f64; m], vec![g; m])?
        .with_weighted_regions(config.weighted_regions);
    Ok(FitResult {
        mixture,
        converged: true,
        iterations_used: 0,
        objective: f64::INFINITY,
        objective_trace: Vec::new(),
        reseeded: 0,
        dof_failures: 0,
    })
}

/// Maximum-likelihood Gaussian mixture by EM, then `Σ + rI` on every
/// component.
pub fn em_gmm_fit<R: Rng + ?Sized>(
    samples: &[DVector<f64>],
    m: usize,
    config: &AdaptationConfig,
    rng: &mut R,
) -> Result<FitResult<Gaussian>> {
    let d = check_samples(samples, m)?;
    if all_identical(samples) {
        return degenerate_gaussian(&samples[0], m, config);
    }
    let n = samples.len();
    let (mut weights, mut means, shared) = initial_parameters(samples, m, rng);
    let mut covs = vec![shared; m];
    let mut components = means
        .iter()
        .zip(&covs)
        .map(|(mu, c)| Gaussian::with_repair(mu.clone(), c.clone()))
        .collect::<Result<Vec<_>>>()?;

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut reseeded = 0;
    while iterations < config.em_max_iters {
        iterations += 1;
        let (resp, ll) = e_step(samples, &weights, &components);
        trace.push(ll);
        let old = flatten(&weights, &means, &covs);

        let mut masses = vec![0.0; m];
        for j in 0..m {
            let r: Vec<f64> = resp.iter().map(|row| row[j]).collect();
            let mass: f64 = r.iter().sum();
            if mass < EMPTY_COMPONENT_MASS {
                reseeded += 1;
                means[j] = samples[rng.random_range(0..n)].clone();
                covs[j] = DMatrix::identity(d, d) * fallback_variance(config.reg_radius);
                masses[j] = 1.0;
                continue;
            }
            let (mu, cov) = weighted_moments(samples, &r, &r, mass);
            means[j] = mu;
            covs[j] = cov;
            masses[j] = mass;
        }
        let total: f64 = masses.iter().sum();
        weights = masses.iter().map(|w| w / total).collect();
        components = means
            .iter()
            .zip(&covs)
            .map(|(mu, c)| Gaussian::with_repair(mu.clone(), c.clone()))
            .collect::<Result<Vec<_>>>()?;
        covs = components.iter().map(|g| g.cov().clone()).collect();

        if max_abs_change(&old, &flatten(&weights, &means, &covs)) < config.em_tol {
            converged = true;
            break;
        }
    }
    let (_, ll) = e_step(samples, &weights, &components);
    trace.push(ll);

    let components = means
        .into_iter()
        .zip(&covs)
        .map(|(mu, c)| Gaussian::with_repair(mu, regularize_cov(c, config.reg_radius)))
        .collect::<Result<Vec<_>>>()?;
    let mixture =
        MixtureModel::new(weights, components)?.with_weighted_regions(config.weighted_regions);
    Ok(FitResult {
        mixture,
        converged,
        iterations_used: iterations,
        objective: ll,
        objective_trace: trace,
        reseeded,
        dof_failures: 0,
    })
}
