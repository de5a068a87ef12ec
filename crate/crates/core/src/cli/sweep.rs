use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::NamedEnvironment;
use super::CliError;
use crate::analytic::{Analysis, CoverageEstimate, Method, QuadratureSpec};
use crate::model::{SystemConfig, UserKind};
use crate::montecarlo::{estimate_coverage, McSettings};

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Delta,
    ThetaUp,
    ThetaDown,
    PhiUp,
    PhiDown,
    HBs,
    HAerial,
}

impl Axis {
    pub const ALL: [Axis; 7] = [
        Axis::Delta,
        Axis::ThetaUp,
        Axis::ThetaDown,
        Axis::PhiUp,
        Axis::PhiDown,
        Axis::HBs,
        Axis::HAerial,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Delta => "delta",
            Axis::ThetaUp => "theta_up",
            Axis::ThetaDown => "theta_down",
            Axis::PhiUp => "phi_up",
            Axis::PhiDown => "phi_down",
            Axis::HBs => "h_bs",
            Axis::HAerial => "h_aerial",
        }
    }

    pub fn apply(self, cfg: &mut SystemConfig, value: f64) {
        match self {
            Axis::Delta => cfg.deployment.delta = value,
            Axis::ThetaUp => cfg.antenna.theta_up = value,
            Axis::ThetaDown => cfg.antenna.theta_down = value,
            Axis::PhiUp => cfg.antenna.phi_up = value,
            Axis::PhiDown => cfg.antenna.phi_down = value,
            Axis::HBs => cfg.deployment.h_bs = value,
            Axis::HAerial => cfg.deployment.h_aerial = value,
        }
    }

    pub fn value(self, cfg: &SystemConfig) -> f64 {
        match self {
            Axis::Delta => cfg.deployment.delta,
            Axis::ThetaUp => cfg.antenna.theta_up,
            Axis::ThetaDown => cfg.antenna.theta_down,
            Axis::PhiUp => cfg.antenna.phi_up,
            Axis::PhiDown => cfg.antenna.phi_down,
            Axis::HBs => cfg.deployment.h_bs,
            Axis::HAerial => cfg.deployment.h_aerial,
        }
    }

    /// Grid matching the figure x-axes: δ in steps of 0.1, angles in steps
    /// of 2°, beamwidths in steps of 4°, heights in steps of 20 m.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            Axis::Delta => linspace(0.0, 1.0, 0.1),
            Axis::ThetaUp | Axis::ThetaDown => linspace(10.0, 20.0, 2.0),
            Axis::PhiUp | Axis::PhiDown => linspace(4.0, 20.0, 4.0),
            Axis::HBs => linspace(20.0, 80.0, 10.0),
            Axis::HAerial => linspace(60.0, 200.0, 20.0),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        Axis::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Axis::ALL.iter().map(|a| a.as_str()).collect();
                format!("unknown axis `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Inclusive grid from `start` to `stop`; values are rounded to 12 decimals so
/// that 0.1-steps print as 0.3 rather than 0.30000000000000004.
pub fn linspace(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect()
}

/// Parses `start:stop:step` or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|e| format!("bad grid value `{}`: {e}", t.trim()))
    };
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(h > 0.0) || b < a {
            return Err(format!("bad grid range `{s}`"));
        }
        return Ok(linspace(a, b, h));
    }
    s.split(',').map(num).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: Axis,
    pub grid: Vec<f64>,
    pub environments: Vec<NamedEnvironment>,
    pub user: UserKind,
    pub methods: Vec<Method>,
    pub mc: McSettings,
    pub quadrature: QuadratureSpec,
    /// Record wall-clock time per row. Off gives byte-reproducible output.
    pub timing: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.grid.is_empty() {
            return Err(CliError::Spec("sweep grid is empty".into()));
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CliError::Spec(format!(
                "sweep grid must be strictly increasing: {:?}",
                self.grid
            )));
        }
        if self.environments.is_empty() {
            return Err(CliError::Spec("no environment selected".into()));
        }
        if self.methods.is_empty() {
            return Err(CliError::Spec("no method selected".into()));
        }
        Ok(())
    }
}

/// One output line: a (axis value, environment, method) point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: Axis,
    pub axis_value: f64,
    pub environment: String,
    pub user: UserKind,
    pub method: Method,
    /// `None` when the point failed; see `error`.
    pub coverage: Option<f64>,
    pub ci_half_width: Option<f64>,
    /// Association share per serving type, in `BsType::ALL` order.
    pub shares: [f64; 8],
    pub wall_ms: f64,
    pub config: SystemConfig,
    pub error: Option<String>,
}

/// Flat record with the fixed column layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowRecord {
    pub axis: Axis,
    pub axis_value: f64,
    pub environment: String,
    pub user: UserKind,
    pub method: Method,
    pub coverage: Option<f64>,
    pub ci_half_width: Option<f64>,
    #[serde(rename = "share_UML")]
    pub share_uml: f64,
    #[serde(rename = "share_UMN")]
    pub share_umn: f64,
    #[serde(rename = "share_USL")]
    pub share_usl: f64,
    #[serde(rename = "share_USN")]
    pub share_usn: f64,
    #[serde(rename = "share_DML")]
    pub share_dml: f64,
    #[serde(rename = "share_DMN")]
    pub share_dmn: f64,
    #[serde(rename = "share_DSL")]
    pub share_dsl: f64,
    #[serde(rename = "share_DSN")]
    pub share_dsn: f64,
    pub wall_ms: f64,
}

pub const CSV_HEADER: &str = "axis,axis_value,environment,user,method,coverage,ci_half_width,share_UML,share_UMN,share_USL,share_USN,share_DML,share_DMN,share_DSL,share_DSN,wall_ms";

#[derive(Serialize)]
struct JsonRow<'a> {
    #[serde(flatten)]
    record: RowRecord,
    config: &'a SystemConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: &'a Option<String>,
}

impl SweepRow {
    pub fn record(&self) -> RowRecord {
        let s = self.shares;
        RowRecord {
            axis: self.axis,
            axis_value: self.axis_value,
            environment: self.environment.clone(),
            user: self.user,
            method: self.method,
            coverage: self.coverage,
            ci_half_width: self.ci_half_width,
            share_uml: s[0],
            share_umn: s[1],
            share_usl: s[2],
            share_usn: s[3],
            share_dml: s[4],
            share_dmn: s[5],
            share_dsl: s[6],
            share_dsn: s[7],
            wall_ms: self.wall_ms,
        }
    }
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for row in rows {
        w.serialize(row.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RowRecord>, CliError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(CliError::Spec(format!("unexpected CSV header: {}", header.join(","))));
    }
    r.deserialize().map(|rec| rec.map_err(CliError::from)).collect()
}

pub fn write_json<W: Write>(rows: &[SweepRow], mut out: W) -> Result<(), CliError> {
    let items: Vec<JsonRow> = rows
        .iter()
        .map(|r| JsonRow {
            record: r.record(),
            config: &r.config,
            error: &r.error,
        })
        .collect();
    serde_json::to_writer_pretty(&mut out, &items)?;
    writeln!(out)?;
    Ok(())
}

fn shares_of(est: &CoverageEstimate) -> [f64; 8] {
    let mut s = [0.0; 8];
    for share in &est.per_type {
        s[share.bs_type.index()] = share.association;
    }
    s
}

/// Evaluates each requested method at one configuration.
pub fn run_point(
    cfg: &SystemConfig,
    user: UserKind,
    methods: &[Method],
    mc: &McSettings,
    quadrature: &QuadratureSpec,
) -> Result<Vec<CoverageEstimate>, CliError> {
    let tau = cfg.tau_linear();
    let mut analysis = None;
    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let est = match method {
            Method::MonteCarlo => estimate_coverage(user, cfg, mc)?.to_estimate(user),
            Method::Exact | Method::Approximate => {
                if analysis.is_none() {
                    analysis = Some(Analysis::new(cfg, user, *quadrature)?);
                }
                analysis.as_ref().unwrap().coverage(method, tau)?
            }
        };
        out.push(est);
    }
    Ok(out)
}

/// One row per (environment, axis value, method), in that nesting order.
/// A failing point yields rows with an error and the sweep carries on.
pub fn run_sweep(spec: &SweepSpec, base: &SystemConfig) -> Result<Vec<SweepRow>, CliError> {
    spec.validate()?;
    let points: Vec<(&NamedEnvironment, f64)> = spec
        .environments
        .iter()
        .flat_map(|env| spec.grid.iter().map(move |&v| (env, v)))
        .collect();
    let rows: Vec<Vec<SweepRow>> = points
        .par_iter()
        .map(|&(env, value)| {
            let mut cfg = *base;
            cfg.environment = env.params;
            spec.axis.apply(&mut cfg, value);
            let row = |method, est: Option<&CoverageEstimate>, ms, error: Option<String>| SweepRow {
                axis: spec.axis,
                axis_value: value,
                environment: env.name.clone(),
                user: spec.user,
                method,
                coverage: est.map(|e| e.value),
                ci_half_width: est.map(|e| match method {
                    Method::MonteCarlo => e.uncertainty,
                    _ => 0.0,
                }),
                shares: est.map(shares_of).unwrap_or([0.0; 8]),
                wall_ms: if spec.timing { ms } else { 0.0 },
                config: cfg,
                error,
            };
            spec.methods
                .iter()
                .map(|&method| {
                    let t = Instant::now();
                    let result = run_point(&cfg, spec.user, &[method], &spec.mc, &spec.quadrature);
                    let ms = (t.elapsed().as_secs_f64() * 1e3 * 1e3).round() / 1e3;
                    match result {
                        Ok(est) => row(method, Some(&est[0]), ms, None),
                        Err(e) => {
                            log::warn!(
                                "{} = {value} ({}, {method}) failed: {e}",
                                spec.axis,
                                env.name
                            );
                            row(method, None, ms, Some(e.to_string()))
                        }
                    }
                })
                .collect()
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// Grid point with the highest coverage among rows of one method and
/// environment.
pub fn argmax(rows: &[SweepRow], environment: &str, method: Method) -> Option<f64> {
    rows.iter()
        .filter(|r| r.environment == environment && r.method == method)
        .filter_map(|r| r.coverage.map(|c| (r.axis_value, c)))
        .fold(None, |best: Option<(f64, f64)>, (x, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((x, c)),
        })
        .map(|(x, _)| x)
}
