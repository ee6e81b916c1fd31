//! Experiment presets bundled with the binary.

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const PRESETS: &[(&str, &str)] = &[
    (
        "gauss-mix-tmrgess",
        include_str!("../presets/gauss-mix-tmrgess.toml"),
    ),
    (
        "gauss-mix-gess",
        include_str!("../presets/gauss-mix-gess.toml"),
    ),
    (
        "gauss-mix-em-gmrgess",
        include_str!("../presets/gauss-mix-em-gmrgess.toml"),
    ),
    (
        "gauss-mix-vi-gmrgess",
        include_str!("../presets/gauss-mix-vi-gmrgess.toml"),
    ),
    (
        "gauss-mix-sa-gmrgess",
        include_str!("../presets/gauss-mix-sa-gmrgess.toml"),
    ),
    (
        "litter-em-tmrgess",
        include_str!("../presets/litter-em-tmrgess.toml"),
    ),
    (
        "logistic-synth",
        include_str!("../presets/logistic-synth.toml"),
    ),
    (
        "logistic-synth-mh",
        include_str!("../presets/logistic-synth-mh.toml"),
    ),
];

pub fn preset_text(name: &str) -> CliResult<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            CliError::Config(format!(
                "unknown preset `{name}` (available: {})",
                names.join(", ")
            ))
        })
}

pub fn load_preset(name: &str, overrides: &[String]) -> CliResult<ExperimentConfig> {
    ExperimentConfig::parse(preset_text(name)?, overrides)
        .map_err(|e| CliError::Config(format!("preset {name}: {e}")))
}
