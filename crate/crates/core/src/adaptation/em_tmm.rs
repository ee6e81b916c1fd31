use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use statrs::function::gamma::digamma;

use super::em_gmm::{e_step, flatten, initial_parameters, weighted_moments};
use super::{
    all_identical, check_samples, fallback_variance, max_abs_change, AdaptationConfig, FitResult,
    EMPTY_COMPONENT_MASS,
};
use crate::distributions::{regularize_cov, MixtureModel, StudentT};
use crate::error::Result;

/// Range searched when estimating degrees of freedom.
pub const DOF_BOUNDS: (f64, f64) = (0.1, 200.0);

/// Posterior mean of the latent precision, `(ν + D) / (ν + δ²)`.
pub fn expected_precision(dof: f64, dim: usize, mahalanobis_sq: f64) -> f64 {
    (dof + dim as f64) / (dof + mahalanobis_sq)
}

/// Left-hand side of the dof score equation. `mean_log_u_minus_u` is
/// `Σ τ_k (ln u_k - u_k) / Σ τ_k` computed with the previous dof `dof_old`.
pub fn dof_equation(dof: f64, dof_old: f64, dim: usize, mean_log_u_minus_u: f64) -> f64 {
    let a = 0.5 * (dof_old + dim as f64);
    -digamma(0.5 * dof) + (0.5 * dof).ln() + 1.0 + mean_log_u_minus_u + digamma(a) - a.ln()
}

/// Bisection root of [`dof_equation`] on [`DOF_BOUNDS`], clamped to a bound
/// when there is no sign change. `None` on non-finite input.
fn solve_dof(dof_old: f64, dim: usize, mean_log_u_minus_u: f64) -> Option<f64> {
    let f = |nu: f64| dof_equation(nu, dof_old, dim, mean_log_u_minus_u);
    let (mut lo, mut hi) = DOF_BOUNDS;
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !f_lo.is_finite() || !f_hi.is_finite() {
        return None;
    }
    // f decreases in ν
    if f_lo <= 0.0 {
        return Some(lo);
    }
    if f_hi >= 0.0 {
        return Some(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if !v.is_finite() {
            return None;
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * mid.max(1.0) {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

fn build(means: &[DVector<f64>], scales: &[DMatrix<f64>], dofs: &[f64]) -> Result<Vec<StudentT>> {
    means
        .iter()
        .zip(scales)
        .zip(dofs)
        .map(|((mu, s), &nu)| StudentT::with_repair(mu.clone(), s.clone(), nu))
        .collect()
}

/// Student's-t mixture by EM with latent precision weights. Degrees of
/// freedom are held at `config.fixed_dof` when set, otherwise started at
/// `config.initial_dof` and re-estimated every iteration.
pub fn em_tmm_fit<R: Rng + ?Sized>(
    samples: &[DVector<f64>],
    m: usize,
    config: &AdaptationConfig,
    rng: &mut R,
) -> Result<FitResult<StudentT>> {
    let d = check_samples(samples, m)?;
    let start_dof = config.fixed_dof.unwrap_or(config.initial_dof);
    if all_identical(samples) {
        let var = fallback_variance(config.reg_radius);
        let t = StudentT::new(samples[0].clone(), DMatrix::identity(d, d) * var, start_dof)?;
        let mixture = MixtureModel::new(vec![1.0 / m as f64; m], vec![t; m])?
            .with_weighted_regions(config.weighted_regions);
        return Ok(FitResult {
            mixture,
            converged: true,
            iterations_used: 0,
            objective: f64::INFINITY,
            objective_trace: Vec::new(),
            reseeded: 0,
            dof_failures: 0,
        });
    }
    let n = samples.len();
    let (mut weights, mut means, shared) = initial_parameters(samples, m, rng);
    let mut scales = vec![shared; m];
    let mut dofs = vec![start_dof; m];
    let mut components = build(&means, &scales, &dofs)?;

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut reseeded = 0;
    let mut dof_failures = 0;
    while iterations < config.em_max_iters {
        iterations += 1;
        let (resp, ll) = e_step(samples, &weights, &components);
        trace.push(ll);
        let mut old = flatten(&weights, &means, &scales);
        old.extend(&dofs);

        let mut masses = vec![0.0; m];
        for j in 0..m {
            let tau: Vec<f64> = resp.iter().map(|row| row[j]).collect();
            let mass: f64 = tau.iter().sum();
            if mass < EMPTY_COMPONENT_MASS {
                reseeded += 1;
                means[j] = samples[rng.random_range(0..n)].clone();
                scales[j] = DMatrix::identity(d, d) * fallback_variance(config.reg_radius);
                masses[j] = 1.0;
                continue;
            }
            let u: Vec<f64> = samples
                .iter()
                .map(|x| expected_precision(dofs[j], d, components[j].mahalanobis_sq(x)))
                .collect();
            let tau_u: Vec<f64> = tau.iter().zip(&u).map(|(t, u)| t * u).collect();
            let (mu, scale) = weighted_moments(samples, &tau_u, &tau_u, mass);
            means[j] = mu;
            scales[j] = scale;
            masses[j] = mass;
            if config.fixed_dof.is_none() {
                let score = tau
                    .iter()
                    .zip(&u)
                    .map(|(t, u)| t * (u.ln() - u))
                    .sum::<f64>()
                    / mass;
                match solve_dof(dofs[j], d, score) {
                    Some(nu) => dofs[j] = nu,
                    None => dof_failures += 1,
                }
            }
        }
        let total: f64 = masses.iter().sum();
        weights = masses.iter().map(|w| w / total).collect();
        components = build(&means, &scales, &dofs)?;
        scales = components.iter().map(|t| t.scale().clone()).collect();

        let mut new = flatten(&weights, &means, &scales);
        new.extend(&dofs);
        if max_abs_change(&old, &new) < config.em_tol {
            converged = true;
            break;
        }
    }
    let (_, ll) = e_step(samples, &weights, &components);
    trace.push(ll);

    let components = means
        .into_iter()
        .zip(&scales)
        .zip(&dofs)
        .map(|((mu, s), &nu)| StudentT::with_repair(mu, regularize_cov(s, config.reg_radius), nu))
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
        dof_failures,
    })
}
