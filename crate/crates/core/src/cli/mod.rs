//! Configuration files, parameter sweeps, analytic-vs-simulation validation
//! and figure data generation. The binary in `main.rs` is a thin clap layer
//! over these functions.

pub mod config;
pub mod figures;
pub mod sweep;
pub mod validate;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::analytic::{AnalyticError, Method};
use crate::model::ModelError;
use crate::montecarlo::McError;

pub use config::{load_config, parse_config, ConfigError, ConfigFile, EnvChoice, EnvironmentPreset, NamedEnvironment};
pub use figures::{figure_specs, write_figures, FigureSpec};
pub use sweep::{argmax, read_csv, run_point, run_sweep, write_csv, write_json, Axis, RowRecord, SweepRow, SweepSpec, CSV_HEADER};
pub use validate::{default_scenarios, delta_scenarios, run_validation, ValidationReport, ValidationRow, ValidationScenario, DEFAULT_GATE};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    MonteCarlo(#[from] McError),
    #[error("{0}")]
    Spec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

/// Parses a comma-separated method list such as `approx,mc`.
pub fn parse_methods(s: &str) -> Result<Vec<Method>, String> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let m: Method = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err("empty method list".into());
    }
    Ok(out)
}
