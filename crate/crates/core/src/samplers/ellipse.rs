use std::f64::consts::TAU;

use nalgebra::DVector;
use rand::{Rng, RngExt};

/// Upper bound on proposals per elliptical step. Hitting it returns the
/// current point with the cap recorded as the rejection count.
pub const MAX_SHRINK_ITERS: usize = 1000;

pub(crate) struct EllipseMove<T> {
    /// Accepted point, or `None` when the shrinkage cap was hit.
    pub accepted: Option<(DVector<f64>, T)>,
    pub theta: f64,
    pub rejections: usize,
}

/// Point on the ellipse through `x` and `aux` centred at `center`.
pub(crate) fn ellipse_point(
    x: &DVector<f64>,
    aux: &DVector<f64>,
    center: &DVector<f64>,
    theta: f64,
) -> DVector<f64> {
    let (s, c) = theta.sin_cos();
    DVector::from_fn(x.len(), |i, _| {
        (x[i] - center[i]) * c + (aux[i] - center[i]) * s + center[i]
    })
}

/// Angle-bracket shrinkage search. `accept` returns `Some(payload)` for an
/// in-slice proposal. `on_reject` sees the bracket after every shrink.
pub(crate) fn shrink_on_ellipse<R, T, F, O>(
    x: &DVector<f64>,
    aux: &DVector<f64>,
    center: &DVector<f64>,
    rng: &mut R,
    mut accept: F,
    mut on_reject: O,
) -> EllipseMove<T>
where
    R: Rng + ?Sized,
    F: FnMut(&DVector<f64>) -> Option<T>,
    O: FnMut(f64, f64),
{
    let mut theta = rng.random::<f64>() * TAU;
    let (mut lo, mut hi) = (theta - TAU, theta);
    let mut rejections = 0;
    loop {
        let proposal = ellipse_point(x, aux, center, theta);
        if let Some(payload) = accept(&proposal) {
            return EllipseMove {
                accepted: Some((proposal, payload)),
                theta,
                rejections,
            };
        }
        rejections += 1;
        if rejections >= MAX_SHRINK_ITERS {
            return EllipseMove {
                accepted: None,
                theta,
                rejections,
            };
        }
        if theta < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        on_reject(lo, hi);
        theta = lo + rng.random::<f64>() * (hi - lo);
    }
}
