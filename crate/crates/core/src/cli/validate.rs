use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::{EnvironmentPreset, NamedEnvironment};
use super::CliError;
use crate::analytic::{Analysis, Method, QuadratureSpec};
use crate::model::{SystemConfig, UserKind};
use crate::montecarlo::{estimate_coverage, McSettings};

pub const DEFAULT_GATE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationScenario {
    pub name: String,
    pub user: UserKind,
    pub config: SystemConfig,
}

/// Environments × users × δ ∈ {0, 0.2, …, 1}, built on `base`.
pub fn delta_scenarios(
    base: &SystemConfig,
    environments: &[NamedEnvironment],
    users: &[UserKind],
) -> Vec<ValidationScenario> {
    let mut out = Vec::new();
    for env in environments {
        for &user in users {
            for k in 0..=5 {
                let delta = k as f64 / 5.0;
                let mut cfg = base.with_delta(delta);
                cfg.environment = env.params;
                out.push(ValidationScenario {
                    name: format!("{}/{}/delta={delta}", env.name, user),
                    user,
                    config: cfg,
                });
            }
        }
    }
    out
}

/// The preset environments, both users, six δ values.
pub fn default_scenarios(base: &SystemConfig) -> Vec<ValidationScenario> {
    let envs: Vec<_> = EnvironmentPreset::ALL.iter().map(|p| p.named()).collect();
    delta_scenarios(base, &envs, &UserKind::ALL)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub scenario: String,
    pub user: UserKind,
    pub delta: f64,
    pub analytic: f64,
    pub monte_carlo: f64,
    pub ci_half_width: f64,
    pub abs_diff: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub gate: f64,
    pub n_realizations: u64,
    pub seed: u64,
    pub sim_radius_m: f64,
    pub rows: Vec<ValidationRow>,
    pub max_abs_diff: f64,
    pub passed: bool,
}

impl ValidationReport {
    /// Plain-text table. Contains nothing run-dependent (no timings, no thread
    /// counts), so equal inputs give equal bytes.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "approx vs Monte Carlo: n = {}, seed = {}, disk radius = {} m, gate = {}",
            self.n_realizations, self.seed, self.sim_radius_m, self.gate
        );
        let _ = writeln!(
            s,
            "{:<34} {:>8} {:>8} {:>8} {:>8}  result",
            "scenario", "approx", "mc", "ci95", "|diff|"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<34} {:>8.5} {:>8.5} {:>8.5} {:>8.5}  {}",
                r.scenario,
                r.analytic,
                r.monte_carlo,
                r.ci_half_width,
                r.abs_diff,
                if r.pass { "ok" } else { "FAIL" }
            );
        }
        let _ = writeln!(
            s,
            "max |diff| = {:.5}: {}",
            self.max_abs_diff,
            if self.passed { "PASS" } else { "FAIL" }
        );
        s
    }
}

/// Compares the approximate analytic coverage with Monte Carlo for each
/// scenario. A scenario passes when |approx − mc| ≤ gate.
pub fn run_validation(
    scenarios: &[ValidationScenario],
    mc: &McSettings,
    quadrature: &QuadratureSpec,
    gate: f64,
) -> Result<ValidationReport, CliError> {
    if scenarios.is_empty() {
        return Err(CliError::Spec("no validation scenarios".into()));
    }
    let mut rows = Vec::with_capacity(scenarios.len());
    for sc in scenarios {
        let analytic = Analysis::new(&sc.config, sc.user, *quadrature)?
            .coverage(Method::Approximate, sc.config.tau_linear())?
            .value;
        let m = estimate_coverage(sc.user, &sc.config, mc)?;
        let abs_diff = (analytic - m.estimate).abs();
        log::info!("{}: approx {analytic:.5} mc {:.5}", sc.name, m.estimate);
        rows.push(ValidationRow {
            scenario: sc.name.clone(),
            user: sc.user,
            delta: sc.config.deployment.delta,
            analytic,
            monte_carlo: m.estimate,
            ci_half_width: m.ci_half_width,
            abs_diff,
            pass: abs_diff <= gate,
        });
    }
    let max_abs_diff = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    Ok(ValidationReport {
        gate,
        n_realizations: mc.n_realizations,
        seed: mc.master_seed,
        sim_radius_m: mc.sim_radius,
        passed: rows.iter().all(|r| r.pass),
        rows,
        max_abs_diff,
    })
}
