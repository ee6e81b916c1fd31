//! Multi-chain orchestration: lockstep chains, periodic mixture adaption
//! from the pooled chain snapshot, trace assembly.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::adaptation::{
    em_gmm_fit, em_tmm_fit, sa_gmm_update, vi_gmm_fit, AdaptationConfig, Scheme,
};
use crate::diagnostics::{summarize, RunSummary, TraceRecord};
use crate::distributions::{regularize_cov, Component, Gaussian, Mixture, MixtureModel, StudentT};
use crate::error::{Error, Result};
use crate::math::splitmix64;
use crate::samplers::{
    ess_step, gmrgess_step, mh_step, regional_mh_step, tmrgess_step, ChainState, StepOutcome,
    TargetDensity,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Ess,
    Gmrgess,
    Tmrgess,
    RegionalMh,
    Mh,
    Gess,
}

impl KernelKind {
    pub const ALL: [KernelKind; 6] = [
        KernelKind::Ess,
        KernelKind::Gmrgess,
        KernelKind::Tmrgess,
        KernelKind::RegionalMh,
        KernelKind::Mh,
        KernelKind::Gess,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::Ess => "ess",
            KernelKind::Gmrgess => "gmrgess",
            KernelKind::Tmrgess => "tmrgess",
            KernelKind::RegionalMh => "regional_mh",
            KernelKind::Mh => "mh",
            KernelKind::Gess => "gess",
        }
    }

    /// Kernels driven by a fitted mixture.
    pub fn is_adaptive(self) -> bool {
        matches!(
            self,
            KernelKind::Gmrgess | KernelKind::Tmrgess | KernelKind::RegionalMh | KernelKind::Gess
        )
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown kernel `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub kernel: KernelKind,
    pub adaptation: AdaptationConfig,
    /// Distribution of the starting points.
    pub init: Gaussian,
    pub master_seed: u64,
    pub thinning: usize,
    /// Kernel steps per recorded iteration.
    pub steps_per_iteration: usize,
    /// Isotropic proposal variance for random-walk MH.
    pub mh_proposal_variance: f64,
    /// Iterations per rejection-rate window in the run summary.
    pub summary_window: usize,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(kernel: KernelKind, init: Gaussian) -> Self {
        Self {
            chains: 1,
            iterations: 1000,
            burn_in: 0,
            kernel,
            adaptation: AdaptationConfig::default(),
            init,
            master_seed: 0,
            thinning: 1,
            steps_per_iteration: 1,
            mh_proposal_variance: 1.0,
            summary_window: 10,
            threads: None,
        }
    }

    /// Checks everything that does not depend on the target.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.chains == 0 {
            return bad("chains must be at least 1".into());
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.burn_in >= self.iterations {
            return bad(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            ));
        }
        if self.thinning == 0 || self.steps_per_iteration == 0 || self.summary_window == 0 {
            return bad(
                "thinning, steps_per_iteration and summary_window must be at least 1".into(),
            );
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        if !(self.mh_proposal_variance > 0.0 && self.mh_proposal_variance.is_finite()) {
            return bad("mh proposal variance must be finite and > 0".into());
        }
        self.adaptation
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        let scheme = self.adaptation.scheme;
        let m = self.adaptation.components;
        match self.kernel {
            KernelKind::Gmrgess if scheme.is_student_t() => {
                return bad(format!(
                    "kernel gmrgess needs a Gaussian scheme, got {scheme}"
                ));
            }
            KernelKind::Tmrgess if scheme != Scheme::EmTmm => {
                return bad(format!("kernel tmrgess needs scheme em_tmm, got {scheme}"));
            }
            KernelKind::Gess if scheme != Scheme::EmTmm || m != 1 => {
                return bad("kernel gess needs scheme em_tmm with one component".into());
            }
            _ => {}
        }
        if self.kernel.is_adaptive() && self.chains < m {
            return bad(format!(
                "{} chains cannot support a {m}-component fit",
                self.chains
            ));
        }
        Ok(())
    }

    /// Full validation against a target.
    pub fn validate_for<T: TargetDensity + ?Sized>(&self, target: &T) -> Result<()> {
        self.validate()?;
        if self.init.dim() != target.dim() {
            return Err(Error::Config(format!(
                "init dimension {} does not match target dimension {}",
                self.init.dim(),
                target.dim()
            )));
        }
        if self.kernel == KernelKind::Ess {
            match target.gaussian_prior() {
                Some(p) if p.dim() == target.dim() => {}
                _ => {
                    return Err(Error::Config(
                        "kernel ess needs a target with a Gaussian prior".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    /// First iteration at which the mixture is refitted.
    pub fn first_adaption(&self) -> usize {
        self.adaptation.interval.max(2 * self.adaptation.components)
    }

    pub fn is_adaption_iteration(&self, n: usize) -> bool {
        self.kernel.is_adaptive() && n.is_multiple_of(self.adaptation.interval) && n >= self.first_adaption()
    }
}

/// Counters from the adaption barriers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdaptionStats {
    pub adaptions: usize,
    pub reseeded_components: usize,
    pub dof_failures: usize,
    pub skipped_sa_steps: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// One trace per chain, one record per iteration.
    pub traces: Vec<Vec<TraceRecord>>,
    /// `(iteration, mixture)` for the initial mixture (iteration 0) and
    /// every adaption.
    pub mixture_history: Vec<(usize, Mixture)>,
    pub summary: RunSummary,
    pub adaption: AdaptionStats,
}

const INIT_SALT: u64 = 0x5EED_1A17_0000_0001;
const ADAPT_SALT: u64 = 0xADA9_7000_0000_0002;

/// Seed for chain `k`.
pub fn chain_seed(master: u64, k: usize) -> u64 {
    splitmix64(master ^ splitmix64(k as u64 + 1))
}

/// Seed of the stream that draws every chain's starting point.
pub fn init_seed(master: u64) -> u64 {
    splitmix64(master ^ INIT_SALT)
}

/// Seed of the stream used by the mixture fitters.
pub fn adaption_seed(master: u64) -> u64 {
    splitmix64(master ^ ADAPT_SALT)
}

/// Current points of all chains in chain order.
pub fn pooled_snapshot(chains: &[ChainState]) -> Vec<DVector<f64>> {
    chains.iter().map(|c| c.point.clone()).collect()
}

struct Worker {
    chain: usize,
    state: ChainState,
    rng: ChaCha8Rng,
    trace: Vec<TraceRecord>,
}

enum Driver {
    Ess(Gaussian),
    Mh(Gaussian),
    Mixture(Mixture),
}

fn step<T: TargetDensity + ?Sized>(
    kernel: KernelKind,
    driver: &Driver,
    target: &T,
    state: &ChainState,
    rng: &mut ChaCha8Rng,
) -> Result<StepOutcome> {
    match (kernel, driver) {
        (KernelKind::Ess, Driver::Ess(prior)) => {
            ess_step(state, prior, |x| target.log_likelihood(x), rng)
        }
        (KernelKind::Mh, Driver::Mh(proposal)) => mh_step(state, proposal, target, rng),
        (KernelKind::Gmrgess, Driver::Mixture(Mixture::Gaussian(m))) => {
            gmrgess_step(state, m, target, rng)
        }
        (KernelKind::Tmrgess | KernelKind::Gess, Driver::Mixture(Mixture::StudentT(m))) => {
            tmrgess_step(state, m, target, rng)
        }
        (KernelKind::RegionalMh, Driver::Mixture(Mixture::Gaussian(m))) => {
            regional_mh_step(state, m, target, rng)
        }
        (KernelKind::RegionalMh, Driver::Mixture(Mixture::StudentT(m))) => {
            regional_mh_step(state, m, target, rng)
        }
        _ => Err(Error::Config(format!(
            "kernel {kernel} has no matching parameters"
        ))),
    }
}

impl Worker {
    fn advance<T: TargetDensity + ?Sized>(
        &mut self,
        iterations: std::ops::RangeInclusive<usize>,
        kernel: KernelKind,
        steps: usize,
        driver: &Driver,
        target: &T,
    ) -> std::result::Result<(), (usize, Error)> {
        for n in iterations {
            let mut rejections = 0;
            for _ in 0..steps {
                let out =
                    step(kernel, driver, target, &self.state, &mut self.rng).map_err(|e| (n, e))?;
                rejections += out.rejections;
                self.state = out.next;
            }
            self.state.rejections_last_step = rejections;
            self.trace.push(TraceRecord {
                chain: self.chain,
                iteration: n,
                point: self.state.point.clone(),
                rejections,
                region: self.state.region,
            });
        }
        Ok(())
    }
}

/// One-component moment fit used before the first adaption.
fn initial_mixture(points: &[DVector<f64>], config: &AdaptationConfig) -> Result<Mixture> {
    let d = points[0].len();
    let k = points.len() as f64;
    let mean = points.iter().fold(DVector::zeros(d), |acc, p| acc + p) / k;
    let mut cov = DMatrix::zeros(d, d);
    for p in points {
        let c = p - &mean;
        cov.ger(1.0 / k, &c, &c, 1.0);
    }
    let mut cov = regularize_cov(&cov, config.reg_radius);
    if cov.clone().cholesky().is_none() {
        cov = regularize_cov(&cov, config.reg_radius.max(1e-6));
    }
    let mixture = if config.scheme.is_student_t() {
        let dof = config.fixed_dof.unwrap_or(config.initial_dof);
        Mixture::StudentT(
            MixtureModel::single(StudentT::with_repair(mean, cov, dof)?)
                .with_weighted_regions(config.weighted_regions),
        )
    } else {
        Mixture::Gaussian(
            MixtureModel::single(Gaussian::with_repair(mean, cov)?)
                .with_weighted_regions(config.weighted_regions),
        )
    };
    Ok(mixture)
}

fn regularized(raw: &MixtureModel<Gaussian>, r: f64) -> Result<MixtureModel<Gaussian>> {
    let comps = raw
        .components()
        .iter()
        .map(|g| Gaussian::with_repair(g.mean().clone(), regularize_cov(g.cov(), r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MixtureModel::new(raw.weights().to_vec(), comps)?
        .with_weighted_regions(raw.weighted_regions()))
}

struct Adapter {
    config: AdaptationConfig,
    rng: ChaCha8Rng,
    sa_state: Option<MixtureModel<Gaussian>>,
    stats: AdaptionStats,
}

impl Adapter {
    fn refit(&mut self, samples: &[DVector<f64>]) -> Result<Mixture> {
        let m = self.config.components;
        self.stats.adaptions += 1;
        let mixture = match self.config.scheme {
            Scheme::EmGmm => {
                let fit = em_gmm_fit(samples, m, &self.config, &mut self.rng)?;
                self.stats.reseeded_components += fit.reseeded;
                Mixture::Gaussian(fit.mixture)
            }
            Scheme::ViGmm => {
                Mixture::Gaussian(vi_gmm_fit(samples, m, &self.config, &mut self.rng)?.mixture)
            }
            Scheme::EmTmm => {
                let fit = em_tmm_fit(samples, m, &self.config, &mut self.rng)?;
                self.stats.reseeded_components += fit.reseeded;
                self.stats.dof_failures += fit.dof_failures;
                Mixture::StudentT(fit.mixture)
            }
            Scheme::SaGmm => {
                let raw = match self.sa_state.take() {
                    None => {
                        let unregularized = AdaptationConfig {
                            reg_radius: 0.0,
                            ..self.config.clone()
                        };
                        let fit = em_gmm_fit(samples, m, &unregularized, &mut self.rng)?;
                        self.stats.reseeded_components += fit.reseeded;
                        fit.mixture
                    }
                    Some(prev) => {
                        // the first SA step follows the initialising fit
                        let rate = self.config.learning_rate.rate(self.stats.adaptions - 1);
                        let out = sa_gmm_update(&prev, samples, rate)?;
                        if out.skipped {
                            self.stats.skipped_sa_steps += 1;
                        }
                        out.mixture
                    }
                };
                let pseudo = regularized(&raw, self.config.reg_radius)?;
                self.sa_state = Some(raw);
                Mixture::Gaussian(pseudo)
            }
        };
        Ok(mixture)
    }
}

/// Runs all chains with seeds derived from `config.master_seed`.
pub fn run<T: TargetDensity + ?Sized>(config: &RunConfig, target: &T) -> Result<RunResult> {
    let seeds: Vec<u64> = (0..config.chains)
        .map(|k| chain_seed(config.master_seed, k))
        .collect();
    run_with_chain_seeds(config, target, &seeds)
}

/// Runs with explicit per-chain seeds. Starting points and fits still use
/// streams derived from `config.master_seed`.
pub fn run_with_chain_seeds<T: TargetDensity + ?Sized>(
    config: &RunConfig,
    target: &T,
    seeds: &[u64],
) -> Result<RunResult> {
    config.validate_for(target)?;
    if seeds.len() != config.chains {
        return Err(Error::Config(format!(
            "{} seeds for {} chains",
            seeds.len(),
            config.chains
        )));
    }
    let pool = match config.threads {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
        ),
        None => None,
    };
    let body = || execute(config, target, seeds);
    match pool {
        Some(p) => p.install(body),
        None => body(),
    }
}

fn execute<T: TargetDensity + ?Sized>(
    config: &RunConfig,
    target: &T,
    seeds: &[u64],
) -> Result<RunResult> {
    let mut init_rng = ChaCha8Rng::seed_from_u64(init_seed(config.master_seed));
    let starts: Vec<DVector<f64>> = (0..config.chains)
        .map(|_| config.init.sample(&mut init_rng))
        .collect();

    let mut history = Vec::new();
    let mut driver = match config.kernel {
        KernelKind::Ess => Driver::Ess(
            target
                .gaussian_prior()
                .cloned()
                .ok_or_else(|| Error::Config("kernel ess needs a Gaussian prior".into()))?,
        ),
        KernelKind::Mh => Driver::Mh(Gaussian::isotropic(
            DVector::zeros(target.dim()),
            config.mh_proposal_variance,
        )?),
        _ => {
            let m = initial_mixture(&starts, &config.adaptation)?;
            history.push((0, m.clone()));
            Driver::Mixture(m)
        }
    };

    let mut workers: Vec<Worker> = starts
        .into_iter()
        .zip(seeds)
        .enumerate()
        .map(|(k, (point, &seed))| {
            let mut state = ChainState::new(point, seed);
            if let Driver::Mixture(m) = &driver {
                state.region = m.region(&state.point);
            }
            Worker {
                chain: k,
                state,
                rng: ChaCha8Rng::seed_from_u64(seed),
                trace: Vec::with_capacity(config.iterations),
            }
        })
        .collect();

    let mut adapter = Adapter {
        config: config.adaptation.clone(),
        rng: ChaCha8Rng::seed_from_u64(adaption_seed(config.master_seed)),
        sa_state: None,
        stats: AdaptionStats::default(),
    };

    let mut n = 1;
    while n <= config.iterations {
        if config.is_adaption_iteration(n) {
            let states: Vec<ChainState> = workers.iter().map(|w| w.state.clone()).collect();
            let mixture = adapter.refit(&pooled_snapshot(&states))?;
            for w in &mut workers {
                w.state.region = mixture.region(&w.state.point);
            }
            history.push((n, mixture.clone()));
            driver = Driver::Mixture(mixture);
        }
        let mut end = n;
        while end < config.iterations && !config.is_adaption_iteration(end + 1) {
            end += 1;
        }
        let segment = n..=end;
        let results: Vec<std::result::Result<(), (usize, Error)>> = workers
            .par_iter_mut()
            .map(|w| {
                w.advance(
                    segment.clone(),
                    config.kernel,
                    config.steps_per_iteration,
                    &driver,
                    target,
                )
            })
            .collect();
        if let Some((chain, (iteration, source))) = results
            .into_iter()
            .enumerate()
            .find_map(|(k, r)| r.err().map(|e| (k, e)))
        {
            return Err(Error::Chain {
                chain,
                iteration,
                source: Box::new(source),
            });
        }
        n = end + 1;
    }

    let traces: Vec<Vec<TraceRecord>> = workers.into_iter().map(|w| w.trace).collect();
    let summary = summarize(&traces, config.summary_window)?;
    Ok(RunResult {
        traces,
        mixture_history: history,
        summary,
        adaption: adapter.stats,
    })
}
