//! Experiment configuration files.
//!
//! Configs are TOML documents with dotted keys, for example
//!
//! ```toml
//! output = "runs/demo"
//! target.kind = "gauss_mix"
//! run.kernel = "tmrgess"
//! adaptation.scheme = "em_tmm"
//! ```
//!
//! Any key can be overridden from the command line with `--set key=value`.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rgess_core::adaptation::{AdaptationConfig, LearningRate, Scheme, ViHyperparams};
use rgess_core::distributions::Gaussian;
use rgess_core::runner::{KernelKind, RunConfig};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Directory receiving `trace.csv`, `mixtures.csv` and `summary.csv`.
    pub output: PathBuf,
    pub target: TargetSpec,
    #[serde(default)]
    pub run: RunSection,
    pub init: InitSection,
    #[serde(default)]
    pub adaptation: AdaptationSection,
    #[serde(default)]
    pub report: ReportSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    GaussMix,
    Litter,
    LogisticSynth(SyntheticSpec),
    Covtype(CovtypeSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub beta: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovtypeSpec {
    pub path: PathBuf,
    #[serde(default = "defaults::n_select")]
    pub n_select: usize,
    #[serde(default = "defaults::n_features")]
    pub n_features: usize,
    #[serde(default = "defaults::train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub header: bool,
    /// Expected SHA-256 of the file, checked before loading when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "defaults::one")]
    pub chains: usize,
    #[serde(default = "defaults::iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(with = "as_str", default = "defaults::kernel")]
    pub kernel: KernelKind,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "defaults::one")]
    pub thinning: usize,
    #[serde(default = "defaults::one")]
    pub steps_per_iteration: usize,
    #[serde(default = "defaults::unit")]
    pub mh_proposal_variance: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            chains: 1,
            iterations: defaults::iterations(),
            burn_in: 0,
            kernel: defaults::kernel(),
            master_seed: 0,
            thinning: 1,
            steps_per_iteration: 1,
            mh_proposal_variance: 1.0,
        }
    }
}

/// Starting points are drawn from `N(mean, variance * I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub mean: Vec<f64>,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptationSection {
    #[serde(with = "as_str", default = "defaults::scheme")]
    pub scheme: Scheme,
    #[serde(default = "defaults::one")]
    pub components: usize,
    #[serde(default = "defaults::interval")]
    pub interval: usize,
    #[serde(default = "defaults::reg_radius")]
    pub reg_radius: f64,
    #[serde(default = "defaults::rate_c")]
    pub rate_c: f64,
    #[serde(default = "defaults::rate_n0")]
    pub rate_n0: f64,
    #[serde(default = "defaults::em_max_iters")]
    pub em_max_iters: usize,
    #[serde(default = "defaults::em_tol")]
    pub em_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_dof: Option<f64>,
    #[serde(default = "defaults::initial_dof")]
    pub initial_dof: f64,
    #[serde(default)]
    pub weighted_regions: bool,
    #[serde(default)]
    pub vi: ViSection,
}

impl Default for AdaptationSection {
    fn default() -> Self {
        let d = AdaptationConfig::default();
        Self {
            scheme: d.scheme,
            components: d.components,
            interval: d.interval,
            reg_radius: d.reg_radius,
            rate_c: d.learning_rate.c,
            rate_n0: d.learning_rate.n0,
            em_max_iters: d.em_max_iters,
            em_tol: d.em_tol,
            fixed_dof: d.fixed_dof,
            initial_dof: d.initial_dof,
            weighted_regions: d.weighted_regions,
            vi: ViSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViSection {
    #[serde(default = "defaults::alpha0")]
    pub alpha0: f64,
    #[serde(default = "defaults::beta0")]
    pub beta0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<Vec<f64>>,
    /// Wishart scale matrix, row by row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<Vec<Vec<f64>>>,
}

impl Default for ViSection {
    fn default() -> Self {
        Self {
            alpha0: defaults::alpha0(),
            beta0: defaults::beta0(),
            nu0: None,
            m0: None,
            w0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    /// Iterations per rejection-rate window.
    #[serde(default = "defaults::window")]
    pub window: usize,
    /// Radius of the mode balls used for coverage on the Gaussian-mixture target.
    #[serde(default = "defaults::mode_radius")]
    pub mode_radius: f64,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self {
            window: defaults::window(),
            mode_radius: defaults::mode_radius(),
        }
    }
}

mod defaults {
    use super::*;

    pub fn one() -> usize {
        1
    }
    pub fn unit() -> f64 {
        1.0
    }
    pub fn iterations() -> usize {
        1000
    }
    pub fn kernel() -> KernelKind {
        KernelKind::Gmrgess
    }
    pub fn scheme() -> Scheme {
        AdaptationConfig::default().scheme
    }
    pub fn interval() -> usize {
        AdaptationConfig::default().interval
    }
    pub fn reg_radius() -> f64 {
        AdaptationConfig::default().reg_radius
    }
    pub fn rate_c() -> f64 {
        LearningRate::default().c
    }
    pub fn rate_n0() -> f64 {
        LearningRate::default().n0
    }
    pub fn em_max_iters() -> usize {
        AdaptationConfig::default().em_max_iters
    }
    pub fn em_tol() -> f64 {
        AdaptationConfig::default().em_tol
    }
    pub fn initial_dof() -> f64 {
        AdaptationConfig::default().initial_dof
    }
    pub fn alpha0() -> f64 {
        ViHyperparams::default().alpha0
    }
    pub fn beta0() -> f64 {
        ViHyperparams::default().beta0
    }
    pub fn window() -> usize {
        10
    }
    pub fn mode_radius() -> f64 {
        3.0 * 10f64.sqrt()
    }
    pub fn n_select() -> usize {
        4000
    }
    pub fn n_features() -> usize {
        9
    }
    pub fn train_fraction() -> f64 {
        0.75
    }
}

/// Serde adapter for enums that round-trip through `Display`/`FromStr`.
mod as_str {
    use super::*;

    pub fn serialize<T: Display, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(value)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl ExperimentConfig {
    /// Parses a config document, applying `key=value` overrides first.
    pub fn parse(text: &str, overrides: &[String]) -> CliResult<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(format!("config: {e}")))?;
        for assignment in overrides {
            apply_override(&mut table, assignment)?;
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path, overrides: &[String]) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, overrides)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn adaptation_config(&self) -> CliResult<AdaptationConfig> {
        let a = &self.adaptation;
        let d = self.init.mean.len();
        let w0 = match &a.vi.w0 {
            Some(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(CliError::Config(format!(
                        "adaptation.vi.w0 must be a {d}x{d} matrix"
                    )));
                }
                Some(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
            }
            None => None,
        };
        Ok(AdaptationConfig {
            scheme: a.scheme,
            components: a.components,
            interval: a.interval,
            reg_radius: a.reg_radius,
            learning_rate: LearningRate {
                c: a.rate_c,
                n0: a.rate_n0,
            },
            em_max_iters: a.em_max_iters,
            em_tol: a.em_tol,
            vi: ViHyperparams {
                alpha0: a.vi.alpha0,
                beta0: a.vi.beta0,
                m0: a.vi.m0.as_ref().map(|m| DVector::from_row_slice(m)),
                w0,
                nu0: a.vi.nu0,
            },
            fixed_dof: a.fixed_dof,
            initial_dof: a.initial_dof,
            weighted_regions: a.weighted_regions,
        })
    }

    /// Runner settings; `threads` comes from the environment, not the file.
    pub fn run_config(&self, threads: Option<usize>) -> CliResult<RunConfig> {
        let r = &self.run;
        if self.init.mean.is_empty() {
            return Err(CliError::Config("init.mean must not be empty".into()));
        }
        let init =
            Gaussian::isotropic(DVector::from_row_slice(&self.init.mean), self.init.variance)
                .map_err(|e| CliError::Config(format!("init: {e}")))?;
        let mut cfg = RunConfig::new(r.kernel, init);
        cfg.chains = r.chains;
        cfg.iterations = r.iterations;
        cfg.burn_in = r.burn_in;
        cfg.master_seed = r.master_seed;
        cfg.thinning = r.thinning;
        cfg.steps_per_iteration = r.steps_per_iteration;
        cfg.mh_proposal_variance = r.mh_proposal_variance;
        cfg.summary_window = self.report.window;
        cfg.threads = threads;
        cfg.adaptation = self.adaptation_config()?;
        cfg.validate().map_err(CliError::config)?;
        Ok(cfg)
    }
}

/// Sets a dotted key in a TOML table. Values are parsed as TOML and fall
/// back to bare strings, so `run.kernel=gess` works unquoted.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key `{key}`")));
    }
    let (last, path) = parts.split_last().expect("nonempty");
    let mut cursor = table;
    for part in path {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{part}` in `{key}` is not a table")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}
