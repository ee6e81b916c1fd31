//! Command-line front end for the `rgess` sampler: config files, presets,
//! run orchestration and CSV reports.

pub mod config;
mod error;
pub mod experiment;
pub mod fit;
pub mod presets;

pub use error::{CliError, CliResult};

/// Worker-thread cap from `RGESS_THREADS`; unset or empty means rayon's
/// default pool.
pub fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var("RGESS_THREADS") {
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "RGESS_THREADS must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(None),
    }
}
