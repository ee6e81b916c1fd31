use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use statrs::function::gamma::{digamma, ln_gamma};

use super::em_gmm::degenerate_gaussian;
use super::init::{kmeans_plus_plus, nearest_center};
use super::{all_identical, check_samples, sample_mean, AdaptationConfig, FitResult};
use crate::distributions::{regularize_cov, symmetrize, Gaussian, MixtureModel};
use crate::error::{Error, Result};
use crate::math::log_sum_exp;

struct Prior {
    alpha0: f64,
    beta0: f64,
    m0: DVector<f64>,
    w0_inv: DMatrix<f64>,
    nu0: f64,
    ln_b0: f64,
}

/// Variational posterior factors for one component.
struct Posterior {
    alpha: f64,
    beta: f64,
    m: DVector<f64>,
    w: DMatrix<f64>,
    nu: f64,
    ln_det_w: f64,
}

fn ln_det_spd(a: &DMatrix<f64>) -> Result<f64> {
    let chol = a.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

fn inverse_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = symmetrize(a).cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(symmetrize(&chol.inverse()))
}

/// `ln B(W, ν)` for the Wishart normaliser, given `ln |W|`.
fn ln_wishart_norm(ln_det_w: f64, nu: f64, d: usize) -> f64 {
    let df = d as f64;
    let mut s = 0.5 * nu * df * 2f64.ln() + 0.25 * df * (df - 1.0) * PI.ln();
    for i in 1..=d {
        s += ln_gamma(0.5 * (nu + 1.0 - i as f64));
    }
    -0.5 * nu * ln_det_w - s
}

fn expected_ln_det_lambda(p: &Posterior, d: usize) -> f64 {
    let mut s = d as f64 * 2f64.ln() + p.ln_det_w;
    for i in 1..=d {
        s += digamma(0.5 * (p.nu + 1.0 - i as f64));
    }
    s
}

fn ln_dirichlet_norm(alphas: &[f64]) -> f64 {
    ln_gamma(alphas.iter().sum()) - alphas.iter().map(|&a| ln_gamma(a)).sum::<f64>()
}

struct Stats {
    n: Vec<f64>,
    xbar: Vec<DVector<f64>>,
    s: Vec<DMatrix<f64>>,
}

fn statistics(samples: &[DVector<f64>], resp: &[Vec<f64>], m: usize) -> Stats {
    let d = samples[0].len();
    let mut n = vec![0.0; m];
    let mut xbar = vec![DVector::zeros(d); m];
    let mut s = vec![DMatrix::zeros(d, d); m];
    for k in 0..m {
        for (x, r) in samples.iter().zip(resp) {
            n[k] += r[k];
            xbar[k].axpy(r[k], x, 1.0);
        }
        // guard the empty-component division; the mass itself stays ~0
        let nk = n[k].max(1e-300);
        xbar[k] /= nk;
        for (x, r) in samples.iter().zip(resp) {
            let c = x - &xbar[k];
            s[k].ger(r[k], &c, &c, 1.0);
        }
        s[k] /= nk;
    }
    Stats { n, xbar, s }
}

fn m_step(prior: &Prior, st: &Stats) -> Result<Vec<Posterior>> {
    (0..st.n.len())
        .map(|k| {
            let nk = st.n[k];
            let beta = prior.beta0 + nk;
            let m = (&prior.m0 * prior.beta0 + &st.xbar[k] * nk) / beta;
            let diff = &st.xbar[k] - &prior.m0;
            let w_inv = &prior.w0_inv
                + &st.s[k] * nk
                + (&diff * diff.transpose()) * (prior.beta0 * nk / (prior.beta0 + nk));
            let w_inv = symmetrize(&w_inv);
            let ln_det_w = -ln_det_spd(&w_inv)?;
            Ok(Posterior {
                alpha: prior.alpha0 + nk,
                beta,
                m,
                w: inverse_spd(&w_inv)?,
                nu: prior.nu0 + nk,
                ln_det_w,
            })
        })
        .collect()
}

fn quad(w: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (v.transpose() * w * v)[(0, 0)]
}

/// Evidence lower bound for responsibilities `resp` (which produced `st`)
/// and the posterior factors fitted from them.
fn lower_bound(prior: &Prior, post: &[Posterior], st: &Stats, resp: &[Vec<f64>], d: usize) -> f64 {
    let df = d as f64;
    let m = post.len();
    let alpha_hat: f64 = post.iter().map(|p| p.alpha).sum();
    let ln_pi: Vec<f64> = post
        .iter()
        .map(|p| digamma(p.alpha) - digamma(alpha_hat))
        .collect();
    let ln_lambda: Vec<f64> = post.iter().map(|p| expected_ln_det_lambda(p, d)).collect();

    let mut e_lik = 0.0;
    let mut e_prior_mu_lambda = 0.0;
    let mut e_q_mu_lambda = 0.0;
    let mut trace_term = 0.0;
    for k in 0..m {
        let p = &post[k];
        let dx = &st.xbar[k] - &p.m;
        e_lik += st.n[k]
            * (ln_lambda[k]
                - df / p.beta
                - p.nu * (&st.s[k] * &p.w).trace()
                - p.nu * quad(&p.w, &dx)
                - df * (2.0 * PI).ln());
        let dm = &p.m - &prior.m0;
        e_prior_mu_lambda += df * (prior.beta0 / (2.0 * PI)).ln() + ln_lambda[k]
            - df * prior.beta0 / p.beta
            - prior.beta0 * p.nu * quad(&p.w, &dm);
        trace_term += p.nu * (&prior.w0_inv * &p.w).trace();
        let entropy = -ln_wishart_norm(p.ln_det_w, p.nu, d)
            - 0.5 * (p.nu - df - 1.0) * ln_lambda[k]
            + 0.5 * p.nu * df;
        e_q_mu_lambda +=
            0.5 * ln_lambda[k] + 0.5 * df * (p.beta / (2.0 * PI)).ln() - 0.5 * df - entropy;
    }
    e_lik *= 0.5;
    let e_prior_mu_lambda = 0.5 * e_prior_mu_lambda
        + m as f64 * prior.ln_b0
        + 0.5 * (prior.nu0 - df - 1.0) * ln_lambda.iter().sum::<f64>()
        - 0.5 * trace_term;

    let e_z: f64 = resp
        .iter()
        .map(|r| r.iter().zip(&ln_pi).map(|(a, b)| a * b).sum::<f64>())
        .sum();
    let e_pi = ln_dirichlet_norm(&vec![prior.alpha0; m])
        + (prior.alpha0 - 1.0) * ln_pi.iter().sum::<f64>();
    let e_q_z: f64 = resp
        .iter()
        .flat_map(|r| r.iter())
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum();
    let alphas: Vec<f64> = post.iter().map(|p| p.alpha).collect();
    let e_q_pi = post
        .iter()
        .zip(&ln_pi)
        .map(|(p, l)| (p.alpha - 1.0) * l)
        .sum::<f64>()
        + ln_dirichlet_norm(&alphas);

    e_lik + e_z + e_pi + e_prior_mu_lambda - e_q_z - e_q_pi - e_q_mu_lambda
}

fn e_step(samples: &[DVector<f64>], post: &[Posterior], d: usize) -> Vec<Vec<f64>> {
    let df = d as f64;
    let alpha_hat: f64 = post.iter().map(|p| p.alpha).sum();
    let consts: Vec<f64> = post
        .iter()
        .map(|p| {
            digamma(p.alpha) - digamma(alpha_hat) + 0.5 * expected_ln_det_lambda(p, d)
                - 0.5 * df * (2.0 * PI).ln()
                - 0.5 * df / p.beta
        })
        .collect();
    samples
        .iter()
        .map(|x| {
            let ln_rho: Vec<f64> = post
                .iter()
                .zip(&consts)
                .map(|(p, c)| c - 0.5 * p.nu * quad(&p.w, &(x - &p.m)))
                .collect();
            let norm = log_sum_exp(&ln_rho);
            ln_rho.iter().map(|v| (v - norm).exp()).collect()
        })
        .collect()
}

/// Variational Bayes Gaussian mixture with a Dirichlet prior on the weights
/// and a Normal-Wishart prior on each component. Returns the posterior
/// expected mixture with `Σ + rI` applied.
pub fn vi_gmm_fit<R: Rng + ?Sized>(
    samples: &[DVector<f64>],
    m: usize,
    config: &AdaptationConfig,
    rng: &mut R,
) -> Result<FitResult<Gaussian>> {
    let d = check_samples(samples, m)?;
    if all_identical(samples) {
        return degenerate_gaussian(&samples[0], m, config);
    }
    let df = d as f64;
    let hp = &config.vi;
    let w0 = hp
        .w0
        .clone()
        .unwrap_or_else(|| DMatrix::identity(d, d) / df);
    let nu0 = hp.nu0.unwrap_or(df + 2.0);
    if nu0 <= df - 1.0 {
        return Err(Error::invalid("adaptation.vi.nu0", "must exceed D - 1"));
    }
    let prior = Prior {
        alpha0: hp.alpha0,
        beta0: hp.beta0,
        m0: hp.m0.clone().unwrap_or_else(|| sample_mean(samples)),
        w0_inv: inverse_spd(&w0)?,
        nu0,
        ln_b0: ln_wishart_norm(ln_det_spd(&w0)?, nu0, d),
    };
    if prior.m0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: prior.m0.len(),
        });
    }

    let centers: Vec<DVector<f64>> = kmeans_plus_plus(samples, m, rng)
        .into_iter()
        .map(|i| samples[i].clone())
        .collect();
    let mut resp: Vec<Vec<f64>> = nearest_center(samples, &centers)
        .into_iter()
        .map(|j| (0..m).map(|k| if k == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut post;
    loop {
        iterations += 1;
        let st = statistics(samples, &resp, m);
        post = m_step(&prior, &st)?;
        let bound = lower_bound(&prior, &post, &st, &resp, d);
        if !bound.is_finite() {
            return Err(Error::NonFinite("variational lower bound"));
        }
        let done = trace
            .last()
            .is_some_and(|prev: &f64| (bound - prev).abs() < config.em_tol);
        trace.push(bound);
        if done {
            converged = true;
            break;
        }
        if iterations >= config.em_max_iters {
            break;
        }
        resp = e_step(samples, &post, d);
    }

    let alpha_hat: f64 = post.iter().map(|p| p.alpha).sum();
    let weights: Vec<f64> = post.iter().map(|p| p.alpha / alpha_hat).collect();
    let components = post
        .iter()
        .map(|p| {
            let cov = inverse_spd(&p.w)? / (p.nu - df - 1.0).max(f64::MIN_POSITIVE);
            Gaussian::with_repair(p.m.clone(), regularize_cov(&cov, config.reg_radius))
        })
        .collect::<Result<Vec<_>>>()?;
    let mixture =
        MixtureModel::new(weights, components)?.with_weighted_regions(config.weighted_regions);
    Ok(FitResult {
        mixture,
        converged,
        iterations_used: iterations,
        objective: *trace.last().expect("at least one iteration"),
        objective_trace: trace,
        reseeded: 0,
        dof_failures: 0,
    })
}
