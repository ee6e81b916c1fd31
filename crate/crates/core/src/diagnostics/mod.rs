//! Rejection-rate series, prediction accuracy, mode coverage, posterior
//! means and CSV persistence of traces.

mod csv_io;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::targets::Dataset;

pub use csv_io::{
    read_mixtures_csv, read_trace_csv, sidecar_mixtures_path, write_mixtures_csv, write_trace_csv,
    write_trace_with_mixtures,
};

/// One recorded kernel step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub chain: usize,
    /// 1-based iteration index.
    pub iteration: usize,
    pub point: DVector<f64>,
    pub rejections: usize,
    pub region: usize,
}

/// Balls around known modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpec {
    pub centers: Vec<DVector<f64>>,
    pub radius: f64,
}

impl ModeSpec {
    pub fn new(centers: Vec<DVector<f64>>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius", "must be finite and > 0"));
        }
        Ok(Self { centers, radius })
    }
}

/// Mean rejection count across all chains for each consecutive window of
/// `window` iterations. A shorter final window is kept.
pub fn rejection_rate_series(traces: &[Vec<TraceRecord>], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::invalid("window", "must be at least 1"));
    }
    let len = traces.iter().map(Vec::len).max().unwrap_or(0);
    if len == 0 {
        return Err(Error::invalid("traces", "empty"));
    }
    let mut out = Vec::with_capacity(len.div_ceil(window));
    let mut start = 0;
    while start < len {
        let end = (start + window).min(len);
        let mut total = 0usize;
        let mut count = 0usize;
        for chain in traces {
            for r in chain.iter().take(end).skip(start) {
                total += r.rejections;
                count += 1;
            }
        }
        out.push(total as f64 / count as f64);
        start = end;
    }
    Ok(out)
}

/// Fraction of rows where `I{σ(β·x) > 0.5}` equals the label.
pub fn accuracy_on(beta_hat: &DVector<f64>, x: &DMatrix<f64>, y: &[u8]) -> Result<f64> {
    if x.nrows() == 0 {
        return Err(Error::invalid("test set", "empty"));
    }
    if x.ncols() != beta_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: beta_hat.len(),
        });
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    let z = x * beta_hat;
    let correct = z
        .iter()
        .zip(y)
        .filter(|&(&z, &y)| u8::from(sigmoid(z) > 0.5) == y)
        .count();
    Ok(correct as f64 / y.len() as f64)
}

/// Test-split accuracy of `beta_hat`.
pub fn accuracy(beta_hat: &DVector<f64>, test: &Dataset) -> Result<f64> {
    accuracy_on(beta_hat, &test.test_x, &test.test_y)
}

fn post_burn_in(traces: &[Vec<TraceRecord>], burn_in: usize) -> impl Iterator<Item = &TraceRecord> {
    traces
        .iter()
        .flatten()
        .filter(move |r| r.iteration > burn_in)
}

/// For each mode, the fraction of post-burn-in samples within `radius` of
/// its center. All zeros when nothing survives burn-in.
pub fn mode_coverage(traces: &[Vec<TraceRecord>], modes: &ModeSpec, burn_in: usize) -> Vec<f64> {
    let mut hits = vec![0usize; modes.centers.len()];
    let mut total = 0usize;
    for r in post_burn_in(traces, burn_in) {
        total += 1;
        for (h, c) in hits.iter_mut().zip(&modes.centers) {
            if (&r.point - c).norm() <= modes.radius {
                *h += 1;
            }
        }
    }
    hits.iter()
        .map(|&h| {
            if total == 0 {
                0.0
            } else {
                h as f64 / total as f64
            }
        })
        .collect()
}

/// Mean of post-burn-in samples pooled over chains, keeping iterations with
/// `(iteration - burn_in) % thinning == 0`.
pub fn posterior_mean(
    traces: &[Vec<TraceRecord>],
    burn_in: usize,
    thinning: usize,
) -> Result<DVector<f64>> {
    if thinning == 0 {
        return Err(Error::invalid("thinning", "must be at least 1"));
    }
    let mut sum: Option<DVector<f64>> = None;
    let mut n = 0usize;
    for r in post_burn_in(traces, burn_in).filter(|r| (r.iteration - burn_in).is_multiple_of(thinning)) {
        match &mut sum {
            Some(s) => *s += &r.point,
            None => sum = Some(r.point.clone()),
        }
        n += 1;
    }
    sum.map(|s| s / n as f64)
        .ok_or_else(|| Error::invalid("traces", "no samples after burn-in and thinning"))
}

/// Rejection bookkeeping for a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub window: usize,
    pub rejection_series: Vec<f64>,
    pub mean_rejections: f64,
    /// Fraction of steps whose first proposal was accepted.
    pub first_try_acceptance: f64,
}

pub fn summarize(traces: &[Vec<TraceRecord>], window: usize) -> Result<RunSummary> {
    let rejection_series = rejection_rate_series(traces, window)?;
    let all: Vec<usize> = traces.iter().flatten().map(|r| r.rejections).collect();
    let n = all.len() as f64;
    Ok(RunSummary {
        window,
        rejection_series,
        mean_rejections: all.iter().sum::<usize>() as f64 / n,
        first_try_acceptance: all.iter().filter(|&&r| r == 0).count() as f64 / n,
    })
}
