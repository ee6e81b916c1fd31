use rand::Rng;

use super::{ChainState, StepOutcome, TargetDensity};
use crate::distributions::{Component, Gaussian, MixtureModel};
use crate::error::{Error, Result};
use crate::math::open_closed_unit;

fn current_log_density<T: TargetDensity + ?Sized>(state: &ChainState, target: &T) -> Result<f64> {
    if state.point.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: state.point.len(),
        });
    }
    let v = target.log_density(&state.point);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteLogDensity(v))
    }
}

/// Regional independence Metropolis–Hastings step: propose from the
/// component owning the current point and accept with
/// `min{1, π(x') f_J(x) / (π(x) f_I(x'))}`.
pub fn regional_mh_step<C, T, R>(
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
    let log_pi_x = current_log_density(state, target)?;
    let x = &state.point;
    let log_f_x = mixture.component_log_densities(x);
    let i = mixture.region_from_log_densities(&log_f_x);
    let proposal = mixture.component(i).sample(rng);
    let log_f_p = mixture.component_log_densities(&proposal);
    let j = mixture.region_from_log_densities(&log_f_p);
    let log_pi_p = target.log_density(&proposal);
    let log_alpha = log_pi_p + log_f_x[j] - log_pi_x - log_f_p[i];
    let log_u = open_closed_unit(rng).ln();
    let (next, rejections) = if log_u <= log_alpha {
        (state.advance(proposal, j, 0), 0)
    } else {
        (state.advance(x.clone(), i, 1), 1)
    };
    Ok(StepOutcome {
        next,
        rejections,
        angle: None,
    })
}

/// Random-walk Metropolis step. The increment is drawn from `proposal`
/// with its mean ignored, i.e. `x' = x + L z` with `L L^T` the proposal
/// covariance.
pub fn mh_step<T, R>(
    state: &ChainState,
    proposal: &Gaussian,
    target: &T,
    rng: &mut R,
) -> Result<StepOutcome>
where
    T: TargetDensity + ?Sized,
    R: Rng + ?Sized,
{
    let log_pi_x = current_log_density(state, target)?;
    if proposal.dim() != state.point.len() {
        return Err(Error::DimensionMismatch {
            expected: state.point.len(),
            got: proposal.dim(),
        });
    }
    let candidate = &state.point + (proposal.sample(rng) - proposal.mean());
    let log_alpha = target.log_density(&candidate) - log_pi_x;
    let log_u = open_closed_unit(rng).ln();
    let (next, rejections) = if log_u <= log_alpha {
        (state.advance(candidate, 0, 0), 0)
    } else {
        (state.advance(state.point.clone(), 0, 1), 1)
    };
    Ok(StepOutcome {
        next,
        rejections,
        angle: None,
    })
}
