//! Building targets from configs, running them and writing results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rgess_core::diagnostics::{
    accuracy, accuracy_on, mode_coverage, posterior_mean, read_trace_csv, summarize,
    write_mixtures_csv, write_trace_csv, ModeSpec, TraceRecord,
};
use rgess_core::distributions::Gaussian;
use rgess_core::runner::{run, RunConfig, RunResult};
use rgess_core::samplers::TargetDensity;
use rgess_core::targets::{
    embedded_litter_data, filtered_row_count, load_covtype, synthetic_logistic, CovtypeOptions,
    Dataset, GaussMixTarget, LitterTarget, LogisticTarget, COVTYPE_COLUMNS,
};
use sha2::{Digest, Sha256};

use crate::config::{CovtypeSpec, ExperimentConfig, TargetSpec};
use crate::error::{CliError, CliResult};

pub const TRACE_FILE: &str = "trace.csv";
pub const MIXTURES_FILE: &str = "mixtures.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone)]
pub struct LogisticProblem {
    pub target: LogisticTarget,
    pub data: Dataset,
    /// True coefficients and raw test features, for synthetic data.
    pub truth: Option<(DVector<f64>, nalgebra::DMatrix<f64>)>,
}

#[derive(Debug, Clone)]
pub enum Target {
    GaussMix(GaussMixTarget),
    Litter(LitterTarget),
    Logistic(Box<LogisticProblem>),
}

impl TargetDensity for Target {
    fn dim(&self) -> usize {
        match self {
            Target::GaussMix(t) => t.dim(),
            Target::Litter(t) => t.dim(),
            Target::Logistic(p) => p.target.dim(),
        }
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        match self {
            Target::GaussMix(t) => t.log_density(x),
            Target::Litter(t) => t.log_density(x),
            Target::Logistic(p) => p.target.log_density(x),
        }
    }

    fn gaussian_prior(&self) -> Option<&Gaussian> {
        match self {
            Target::Logistic(p) => p.target.gaussian_prior(),
            _ => None,
        }
    }

    fn log_likelihood(&self, x: &DVector<f64>) -> f64 {
        match self {
            Target::Logistic(p) => p.target.log_likelihood(x),
            _ => self.log_density(x),
        }
    }
}

/// Lowercase hex SHA-256 of a file.
pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest.iter() {
        write!(hex, "{b:02x}").unwrap();
    }
    Ok(hex)
}

fn covtype_problem(spec: &CovtypeSpec, notes: &mut Vec<String>) -> CliResult<Target> {
    let checksum = sha256_file(&spec.path)?;
    if let Some(expected) = &spec.sha256 {
        if !expected.eq_ignore_ascii_case(&checksum) {
            return Err(CliError::Config(format!(
                "{}: sha256 {checksum} does not match expected {expected}",
                spec.path.display()
            )));
        }
    }
    let rows = filtered_row_count(&spec.path, spec.header).map_err(CliError::config)?;
    notes.push(format!(
        "covtype: {} ({COVTYPE_COLUMNS} columns: 54 features then class; first {} features kept), sha256 {checksum}, {rows} rows in the two largest classes",
        spec.path.display(),
        spec.n_features
    ));
    let options = CovtypeOptions {
        n_select: spec.n_select,
        n_features: spec.n_features,
        train_fraction: spec.train_fraction,
        seed: spec.seed,
        header: spec.header,
    };
    let data = load_covtype(&spec.path, &options).map_err(CliError::config)?;
    let target = LogisticTarget::from_training(&data).map_err(CliError::config)?;
    Ok(Target::Logistic(Box::new(LogisticProblem {
        target,
        data,
        truth: None,
    })))
}

/// Builds the target. Human-readable notes (dataset checksums) are pushed
/// onto `notes`.
pub fn build_target(spec: &TargetSpec, notes: &mut Vec<String>) -> CliResult<Target> {
    match spec {
        TargetSpec::GaussMix => Ok(Target::GaussMix(GaussMixTarget::new())),
        TargetSpec::Litter => Ok(Target::Litter(embedded_litter_data())),
        TargetSpec::LogisticSynth(s) => {
            if s.beta.is_empty() {
                return Err(CliError::Config("target.beta must not be empty".into()));
            }
            if s.n_train == 0 || s.n_test == 0 {
                return Err(CliError::Config(
                    "target.n_train and target.n_test must be positive".into(),
                ));
            }
            let beta = DVector::from_row_slice(&s.beta);
            let synth =
                synthetic_logistic(s.n_train, s.n_test, &beta, s.seed).map_err(CliError::config)?;
            let target = LogisticTarget::from_training(&synth.data).map_err(CliError::config)?;
            Ok(Target::Logistic(Box::new(LogisticProblem {
                target,
                data: synth.data,
                truth: Some((synth.beta, synth.raw_test_x)),
            })))
        }
        TargetSpec::Covtype(spec) => covtype_problem(spec, notes),
    }
}

/// A validated, ready-to-run experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub run: RunConfig,
    pub target: Target,
    pub notes: Vec<String>,
}

impl Experiment {
    /// Validates everything that can be checked without sampling.
    pub fn prepare(mut config: ExperimentConfig, threads: Option<usize>) -> CliResult<Self> {
        if let TargetSpec::Covtype(spec) = &mut config.target {
            spec.path = spec
                .path
                .canonicalize()
                .map_err(|e| CliError::Config(format!("{}: {e}", spec.path.display())))?;
        }
        if config.report.window == 0 {
            return Err(CliError::Config("report.window must be at least 1".into()));
        }
        if !(config.report.mode_radius > 0.0 && config.report.mode_radius.is_finite()) {
            return Err(CliError::Config(
                "report.mode_radius must be finite and > 0".into(),
            ));
        }
        let run = config.run_config(threads)?;
        let mut notes = Vec::new();
        let target = build_target(&config.target, &mut notes)?;
        run.validate_for(&target).map_err(CliError::config)?;
        Ok(Self {
            config,
            run,
            target,
            notes,
        })
    }

    pub fn execute(&self) -> CliResult<RunResult> {
        run(&self.run, &self.target).map_err(CliError::runtime)
    }

    /// Runs and writes trace, mixture history, summary and resolved config
    /// into the output directory.
    pub fn run_and_write(&self, dir: &Path) -> CliResult<RunResult> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("output {}: {e}", dir.display())))?;
        let result = self.execute()?;
        write_trace_csv(dir.join(TRACE_FILE), &result.traces).map_err(CliError::runtime)?;
        write_mixtures_csv(dir.join(MIXTURES_FILE), &result.mixture_history)
            .map_err(CliError::runtime)?;
        let metrics = compute_metrics(
            &self.config,
            &self.target,
            &result.traces,
            self.config.report.window,
        )?;
        write_metrics(&dir.join(SUMMARY_FILE), &metrics)?;
        let config_path = dir.join(CONFIG_FILE);
        fs::write(&config_path, self.config.to_toml())
            .map_err(|e| CliError::io(&config_path, e))?;
        Ok(result)
    }
}

/// One `metric,index,value` row of a summary or report.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: &'static str,
    pub index: usize,
    pub value: f64,
}

impl Metric {
    fn new(name: &'static str, index: usize, value: f64) -> Self {
        Self { name, index, value }
    }
}

/// Diagnostics derived from traces alone (plus the target's test data).
pub fn compute_metrics(
    config: &ExperimentConfig,
    target: &Target,
    traces: &[Vec<TraceRecord>],
    window: usize,
) -> CliResult<Vec<Metric>> {
    let summary = summarize(traces, window).map_err(CliError::runtime)?;
    let mut out: Vec<Metric> = summary
        .rejection_series
        .iter()
        .enumerate()
        .map(|(i, &v)| Metric::new("rejection_rate", i, v))
        .collect();
    out.push(Metric::new("mean_rejections", 0, summary.mean_rejections));
    out.push(Metric::new(
        "first_try_acceptance",
        0,
        summary.first_try_acceptance,
    ));

    let burn_in = config.run.burn_in;
    let mean = posterior_mean(traces, burn_in, config.run.thinning).map_err(CliError::runtime)?;
    out.extend(
        mean.iter()
            .enumerate()
            .map(|(i, &v)| Metric::new("posterior_mean", i, v)),
    );

    match target {
        Target::GaussMix(_) => {
            let modes = ModeSpec::new(GaussMixTarget::mode_centers(), config.report.mode_radius)
                .map_err(CliError::config)?;
            let cov = mode_coverage(traces, &modes, burn_in);
            out.extend(
                cov.iter()
                    .enumerate()
                    .map(|(j, &v)| Metric::new("mode_coverage", j, v)),
            );
        }
        Target::Logistic(p) => {
            let acc = accuracy(&mean, &p.data).map_err(CliError::runtime)?;
            out.push(Metric::new("accuracy", 0, acc));
            if let Some((beta, raw_x)) = &p.truth {
                let bayes = accuracy_on(beta, raw_x, &p.data.test_y).map_err(CliError::runtime)?;
                out.push(Metric::new("bayes_accuracy", 0, bayes));
            }
        }
        Target::Litter(_) => {}
    }
    Ok(out)
}

pub fn format_metrics(metrics: &[Metric]) -> String {
    let mut s = String::from("metric,index,value\n");
    for m in metrics {
        writeln!(s, "{},{},{:.16e}", m.name, m.index, m.value).unwrap();
    }
    s
}

pub fn write_metrics(path: &Path, metrics: &[Metric]) -> CliResult<()> {
    fs::write(path, format_metrics(metrics)).map_err(|e| CliError::io(path, e))
}

/// Looks up a metric in a written summary, e.g. `("accuracy", 0)`.
pub fn read_metric(path: &Path, name: &str, index: usize) -> CliResult<Option<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    for line in text.lines().skip(1) {
        let mut cols = line.split(',');
        if let (Some(n), Some(i), Some(v)) = (cols.next(), cols.next(), cols.next()) {
            if n == name && i.parse() == Ok(index) {
                return v
                    .parse()
                    .map(Some)
                    .map_err(|_| CliError::Config(format!("{}: bad value `{v}`", path.display())));
            }
        }
    }
    Ok(None)
}

/// Recomputes diagnostics for a finished run directory and writes
/// `report.csv`. The window defaults to the one the run used.
pub fn report(dir: &Path, window: Option<usize>) -> CliResult<PathBuf> {
    let config_path = dir.join(CONFIG_FILE);
    let config = ExperimentConfig::load(&config_path, &[])?;
    let window = window.unwrap_or(config.report.window);
    if window == 0 {
        return Err(CliError::Config("window must be at least 1".into()));
    }
    let traces = read_trace_csv(dir.join(TRACE_FILE)).map_err(CliError::config)?;
    let mut notes = Vec::new();
    let target = build_target(&config.target, &mut notes)?;
    let metrics = compute_metrics(&config, &target, &traces, window)?;
    let out = dir.join(REPORT_FILE);
    write_metrics(&out, &metrics)?;
    Ok(out)
}
