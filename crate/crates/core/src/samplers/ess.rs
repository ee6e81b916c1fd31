use nalgebra::DVector;
use rand::Rng;

use super::ellipse::shrink_on_ellipse;
use super::{ChainState, StepOutcome};
use crate::distributions::{Component, Gaussian};
use crate::error::{Error, Result};
use crate::math::open_closed_unit;

/// Elliptical slice sampling step for `π(x) ∝ L(x) N(x; μ, Σ)`.
pub fn ess_step<R, F>(
    state: &ChainState,
    prior: &Gaussian,
    log_likelihood: F,
    rng: &mut R,
) -> Result<StepOutcome>
where
    R: Rng + ?Sized,
    F: Fn(&DVector<f64>) -> f64,
{
    let x = &state.point;
    if x.len() != prior.dim() {
        return Err(Error::DimensionMismatch {
            expected: prior.dim(),
            got: x.len(),
        });
    }
    let current = log_likelihood(x);
    if !current.is_finite() {
        return Err(Error::NonFiniteLogDensity(current));
    }
    let aux = prior.sample(rng);
    let threshold = current + open_closed_unit(rng).ln();
    let mv = shrink_on_ellipse(
        x,
        &aux,
        prior.mean(),
        rng,
        |proposal| (log_likelihood(proposal) > threshold).then_some(()),
        |_, _| {},
    );
    let rejections = mv.rejections;
    let point = match mv.accepted {
        Some((p, ())) => p,
        None => x.clone(),
    };
    Ok(StepOutcome {
        next: state.advance(point, 0, rejections),
        rejections,
        angle: Some(mv.theta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flat_likelihood_accepts_first_proposal() {
        let prior = Gaussian::new(
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[10.0, 3.0, 3.0, 2.0]),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut state = ChainState::new(DVector::zeros(2), 1);
        for _ in 0..1000 {
            let out = ess_step(&state, &prior, |_| 0.0, &mut rng).unwrap();
            assert_eq!(out.rejections, 0);
            state = out.next;
        }
    }

    #[test]
    fn non_finite_likelihood_is_an_error() {
        let prior = Gaussian::standard(1);
        let state = ChainState::new(DVector::zeros(1), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = ess_step(&state, &prior, |_| f64::NEG_INFINITY, &mut rng).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLogDensity(_)));
    }

    #[test]
    fn deterministic_given_seed() {
        let prior = Gaussian::standard(3);
        let state = ChainState::new(DVector::from_element(3, 0.3), 4);
        let ll = |x: &DVector<f64>| -(x.norm_squared() - 4.0).powi(2);
        let a = ess_step(&state, &prior, ll, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = ess_step(&state, &prior, ll, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stays_in_slice() {
        let prior = Gaussian::standard(2);
        let ll = |x: &DVector<f64>| -10.0 * (x[0] - 1.0).powi(2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut state = ChainState::new(DVector::from_vec(vec![1.0, 0.0]), 2);
        for _ in 0..500 {
            let out = ess_step(&state, &prior, ll, &mut rng).unwrap();
            assert!(out.rejections < crate::samplers::MAX_SHRINK_ITERS);
            state = out.next;
        }
        assert!(ll(&state.point).is_finite());
    }
}
