use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rgess_cli::config::ExperimentConfig;
use rgess_cli::experiment::{self, Experiment};
use rgess_cli::fit::{fit, FitOptions};
use rgess_cli::presets::{load_preset, preset_text, PRESETS};
use rgess_cli::{threads_from_env, CliError, CliResult};
use rgess_core::adaptation::{AdaptationConfig, LearningRate, Scheme};
use rgess_core::diagnostics::write_mixtures_csv;

#[derive(Parser)]
#[command(
    name = "rgess",
    version,
    about = "Regional elliptical slice sampling experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or a bundled preset.
    Run {
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Override a config key, e.g. `--set run.iterations=200`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory (overrides `output` in the config).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Recompute diagnostics for a finished run into report.csv.
    Report {
        dir: PathBuf,
        #[arg(long)]
        window: Option<usize>,
    },
    /// Fit a mixture to a CSV of samples.
    Fit {
        samples: PathBuf,
        #[arg(long)]
        scheme: Scheme,
        #[arg(long)]
        components: usize,
        #[arg(long, default_value = "mixture.csv")]
        output: PathBuf,
        #[arg(long)]
        reg_radius: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        fixed_dof: Option<f64>,
        /// Starting mixture for SA (a mixtures CSV; the last entry is used).
        #[arg(long)]
        init: Option<PathBuf>,
        /// Number of SA steps.
        #[arg(long, default_value_t = 1)]
        steps: usize,
        #[arg(long)]
        rate_c: Option<f64>,
        #[arg(long)]
        rate_n0: Option<f64>,
    },
    /// List bundled presets, or print one.
    Presets { name: Option<String> },
}

fn cmd_run(
    config: Option<PathBuf>,
    preset: Option<String>,
    overrides: Vec<String>,
    output: Option<PathBuf>,
) -> CliResult<()> {
    let mut cfg = match (config, preset) {
        (Some(path), None) => ExperimentConfig::load(&path, &overrides)?,
        (None, Some(name)) => load_preset(&name, &overrides)?,
        _ => {
            return Err(CliError::Config(
                "give a config file or --preset NAME".into(),
            ))
        }
    };
    if let Some(dir) = output {
        cfg.output = dir;
    }
    let experiment = Experiment::prepare(cfg, threads_from_env()?)?;
    for note in &experiment.notes {
        println!("{note}");
    }
    let dir = experiment.config.output.clone();
    let started = std::time::Instant::now();
    let result = experiment.run_and_write(&dir)?;
    println!(
        "{} chains x {} iterations in {:.1?}; mean rejections {:.3}, {} adaptions",
        experiment.run.chains,
        experiment.run.iterations,
        started.elapsed(),
        result.summary.mean_rejections,
        result.adaption.adaptions
    );
    println!("wrote {}", dir.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    samples: PathBuf,
    scheme: Scheme,
    components: usize,
    output: PathBuf,
    reg_radius: Option<f64>,
    seed: u64,
    max_iters: Option<usize>,
    tol: Option<f64>,
    fixed_dof: Option<f64>,
    init: Option<PathBuf>,
    steps: usize,
    rate_c: Option<f64>,
    rate_n0: Option<f64>,
) -> CliResult<()> {
    if init.is_some() && scheme != Scheme::SaGmm {
        return Err(CliError::Config(
            "--init is only used with --scheme sa_gmm".into(),
        ));
    }
    let d = AdaptationConfig::default();
    let lr = LearningRate::default();
    let adaptation = AdaptationConfig {
        scheme,
        components,
        reg_radius: reg_radius.unwrap_or(d.reg_radius),
        em_max_iters: max_iters.unwrap_or(d.em_max_iters),
        em_tol: tol.unwrap_or(d.em_tol),
        fixed_dof,
        learning_rate: LearningRate {
            c: rate_c.unwrap_or(lr.c),
            n0: rate_n0.unwrap_or(lr.n0),
        },
        ..d
    };
    let history = fit(&FitOptions {
        samples,
        adaptation,
        seed,
        init,
        steps,
    })?;
    write_mixtures_csv(&output, &history).map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("wrote {}", output.display());
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run {
            config,
            preset,
            overrides,
            output,
        } => cmd_run(config, preset, overrides, output),
        Command::Report { dir, window } => {
            let path = experiment::report(&dir, window)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Fit {
            samples,
            scheme,
            components,
            output,
            reg_radius,
            seed,
            max_iters,
            tol,
            fixed_dof,
            init,
            steps,
            rate_c,
            rate_n0,
        } => cmd_fit(
            samples, scheme, components, output, reg_radius, seed, max_iters, tol, fixed_dof, init,
            steps, rate_c, rate_n0,
        ),
        Command::Presets { name: Some(name) } => {
            print!("{}", preset_text(&name)?);
            Ok(())
        }
        Command::Presets { name: None } => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            e.print().ok();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            e.print().ok();
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
