//! Standalone mixture fitting on a CSV of samples.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rgess_core::adaptation::{
    em_gmm_fit, em_tmm_fit, sa_gmm_update, vi_gmm_fit, AdaptationConfig, Scheme,
};
use rgess_core::diagnostics::read_mixtures_csv;
use rgess_core::distributions::Mixture;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub samples: PathBuf,
    pub adaptation: AdaptationConfig,
    pub seed: u64,
    /// Starting mixture for SA; the last entry of the file is used.
    pub init: Option<PathBuf>,
    /// Number of SA steps.
    pub steps: usize,
}

/// Reads one sample per row. A first row that does not parse as numbers is
/// treated as a header.
pub fn read_samples_csv(path: &Path) -> CliResult<Vec<DVector<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut out: Vec<DVector<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(v) => v,
            Err(_) if line == 1 => continue,
            Err(e) => {
                return Err(CliError::Config(format!(
                    "{}: line {line}: {e}",
                    path.display()
                )))
            }
        };
        if row.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Config(format!(
                "{}: line {line}: non-finite value",
                path.display()
            )));
        }
        if let Some(first) = out.first() {
            if first.len() != row.len() {
                return Err(CliError::Config(format!(
                    "{}: line {line}: expected {} fields, found {}",
                    path.display(),
                    first.len(),
                    row.len()
                )));
            }
        }
        out.push(DVector::from_vec(row));
    }
    if out.is_empty() {
        return Err(CliError::Config(format!("{}: no samples", path.display())));
    }
    Ok(out)
}

/// Fits the configured scheme. EM, VI and t-EM return a single regularised
/// fit at step 0. SA returns its unregularised state after every step,
/// starting from `--init` or an unregularised EM fit.
pub fn fit(options: &FitOptions) -> CliResult<Vec<(usize, Mixture)>> {
    let config = &options.adaptation;
    config.validate().map_err(CliError::config)?;
    let samples = read_samples_csv(&options.samples)?;
    let m = config.components;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let fitted = match config.scheme {
        Scheme::EmGmm => Mixture::Gaussian(
            em_gmm_fit(&samples, m, config, &mut rng)
                .map_err(CliError::runtime)?
                .mixture,
        ),
        Scheme::ViGmm => Mixture::Gaussian(
            vi_gmm_fit(&samples, m, config, &mut rng)
                .map_err(CliError::runtime)?
                .mixture,
        ),
        Scheme::EmTmm => Mixture::StudentT(
            em_tmm_fit(&samples, m, config, &mut rng)
                .map_err(CliError::runtime)?
                .mixture,
        ),
        Scheme::SaGmm => return sa_fit(options, &samples, &mut rng),
    };
    Ok(vec![(0, fitted)])
}

fn sa_fit(
    options: &FitOptions,
    samples: &[DVector<f64>],
    rng: &mut ChaCha8Rng,
) -> CliResult<Vec<(usize, Mixture)>> {
    let config = &options.adaptation;
    let mut state = match &options.init {
        Some(path) => {
            let history =
                read_mixtures_csv(path, config.weighted_regions).map_err(CliError::config)?;
            match history.into_iter().last() {
                Some((_, Mixture::Gaussian(m))) => m,
                Some((_, Mixture::StudentT(_))) => {
                    return Err(CliError::Config(format!(
                        "{}: SA needs Gaussian components",
                        path.display()
                    )))
                }
                None => {
                    return Err(CliError::Config(format!(
                        "{}: empty mixture file",
                        path.display()
                    )))
                }
            }
        }
        None => {
            let raw = AdaptationConfig {
                reg_radius: 0.0,
                ..config.clone()
            };
            em_gmm_fit(samples, config.components, &raw, rng)
                .map_err(CliError::runtime)?
                .mixture
        }
    };
    if state.dim() != samples[0].len() {
        return Err(CliError::Config(format!(
            "initial mixture has dimension {}, samples have {}",
            state.dim(),
            samples[0].len()
        )));
    }
    let mut history = vec![(0, Mixture::Gaussian(state.clone()))];
    for step in 1..=options.steps {
        let rate = config.learning_rate.rate(step);
        state = sa_gmm_update(&state, samples, rate)
            .map_err(CliError::runtime)?
            .mixture;
        history.push((step, Mixture::Gaussian(state.clone())));
    }
    Ok(history)
}
