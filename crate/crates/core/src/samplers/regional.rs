use rand::Rng;

use super::ellipse::shrink_on_ellipse;
use super::{ChainState, StepOutcome, TargetDensity};
use crate::distributions::{Component, Gaussian, MixtureModel, StudentT};
use crate::error::{Error, Result};
use crate::math::open_closed_unit;

/// Log acceptance ratio for a regional move `x -> x'` with forward
/// pseudo-prior `I` and reverse pseudo-prior `J = region(x')`:
/// `[log π(x') - log f_I(x')] - [log π(x) - log f_J(x)]`.
pub fn residual_log_ratio(
    log_pi_current: f64,
    log_f_reverse_at_current: f64,
    log_pi_proposal: f64,
    log_f_forward_at_proposal: f64,
) -> f64 {
    (log_pi_proposal - log_f_forward_at_proposal) - (log_pi_current - log_f_reverse_at_current)
}

/// Regional generalized elliptical slice step over any component family.
///
/// The ellipse is centred at the mean of the current region's component,
/// and the auxiliary point comes from [`Component::sample_auxiliary`].
pub fn regional_ess_step<C, T, R>(
    state: &ChainState,
    mixture: &MixtureModel<C>,
    target: &T,
    rng: &mut R,
) -> Result<StepOutcome>
where
    C: Component,
    T: TargetDensity + ?Sized,
    R: Rng + ?Sized,
{
    let x = &state.point;
    if x.len() != mixture.dim() {
        return Err(Error::DimensionMismatch {
            expected: mixture.dim(),
            got: x.len(),
        });
    }
    let log_pi_x = target.log_density(x);
    if !log_pi_x.is_finite() {
        return Err(Error::NonFiniteLogDensity(log_pi_x));
    }
    let log_f_x = mixture.component_log_densities(x);
    let i = mixture.region_from_log_densities(&log_f_x);
    let pseudo_prior = mixture.component(i);
    let aux = pseudo_prior.sample_auxiliary(x, rng);
    let log_u = open_closed_unit(rng).ln();

    let mv = shrink_on_ellipse(
        x,
        &aux,
        pseudo_prior.mean(),
        rng,
        |proposal| {
            let log_pi_p = target.log_density(proposal);
            if log_pi_p.is_nan() || log_pi_p == f64::NEG_INFINITY {
                return None;
            }
            let log_f_p = mixture.component_log_densities(proposal);
            let j = mixture.region_from_log_densities(&log_f_p);
            let ratio = residual_log_ratio(log_pi_x, log_f_x[j], log_pi_p, log_f_p[i]);
            (ratio > log_u).then_some(j)
        },
        |_, _| {},
    );
    let rejections = mv.rejections;
    let (point, region) = match mv.accepted {
        Some((p, j)) => (p, j),
        None => (x.clone(), i),
    };
    Ok(StepOutcome {
        next: state.advance(point, region, rejections),
        rejections,
        angle: Some(mv.theta),
    })
}

/// Gaussian-mixture regional generalized ESS step.
pub fn gmrgess_step<T, R>(
    state: &ChainState,
    mixture: &MixtureModel<Gaussian>,
    target: &T,
    rng: &mut R,
) -> Result<StepOutcome>
where
    T: TargetDensity + ?Sized,
    R: Rng + ?Sized,
{
    regional_ess_step(state, mixture, target, rng)
}

/// Student's-t-mixture regional generalized ESS step. With a single
/// component this is generalized elliptical slice sampling.
pub fn tmrgess_step<T, R>(
    state: &ChainState,
    mixture: &MixtureModel<StudentT>,
    target: &T,
    rng: &mut R,
) -> Result<StepOutcome>
where
    T: TargetDensity + ?Sized,
    R: Rng + ?Sized,
{
    regional_ess_step(state, mixture, target, rng)
}
