//! Canned sweep specifications for the standard coverage curves.
//!
//! The captions do not pin down every pairing of heights and angles; the
//! pairings used here are listed in `provenance.json` next to the data.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use super::config::EnvironmentPreset;
use super::sweep::{linspace, run_sweep, write_csv, write_json, Axis, SweepRow, SweepSpec};
use super::{CliError, OutputFormat};
use crate::analytic::{Method, QuadratureSpec};
use crate::model::{EnvironmentParams, SystemConfig, UserKind};
use crate::montecarlo::McSettings;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureSpec {
    pub id: String,
    pub description: String,
    /// Parameters changed from the defaults for every point of this sweep.
    pub fixed: Vec<(Axis, f64)>,
    pub sweep: SweepSpec,
}

impl FigureSpec {
    pub fn base_config(&self) -> SystemConfig {
        let mut cfg = SystemConfig::defaults_in(EnvironmentParams::URBAN);
        for &(axis, v) in &self.fixed {
            axis.apply(&mut cfg, v);
        }
        cfg
    }

    pub fn run(&self) -> Result<Vec<SweepRow>, CliError> {
        run_sweep(&self.sweep, &self.base_config())
    }
}

/// All figure sweeps. `methods`, `mc` and `timing` apply to each of them.
pub fn figure_specs(
    methods: &[Method],
    mc: &McSettings,
    quadrature: &QuadratureSpec,
    timing: bool,
) -> Vec<FigureSpec> {
    let all_envs: Vec<_> = EnvironmentPreset::ALL.iter().map(|p| p.named()).collect();
    let spec = |axis, grid, envs: Vec<_>, user| SweepSpec {
        axis,
        grid,
        environments: envs,
        user,
        methods: methods.to_vec(),
        mc: *mc,
        quadrature: *quadrature,
        timing,
    };
    let mut out = Vec::new();
    for user in UserKind::ALL {
        out.push(FigureSpec {
            id: format!("{user}_delta"),
            description: format!("{user} coverage vs fraction of up-tilted stations, four environments"),
            fixed: vec![],
            sweep: spec(Axis::Delta, linspace(0.0, 1.0, 0.1), all_envs.clone(), user),
        });
    }
    out.push(FigureSpec {
        id: "aerial_theta_up".into(),
        description: "aerial coverage vs up-tilt angle, four environments".into(),
        fixed: vec![],
        sweep: spec(Axis::ThetaUp, linspace(10.0, 20.0, 2.0), all_envs.clone(), UserKind::Aerial),
    });
    out.push(FigureSpec {
        id: "ground_theta_down".into(),
        description: "ground coverage vs down-tilt angle, four environments".into(),
        fixed: vec![],
        sweep: spec(Axis::ThetaDown, linspace(10.0, 20.0, 2.0), all_envs.clone(), UserKind::Ground),
    });
    for (user, axis, tilt_axis, env) in [
        (UserKind::Aerial, Axis::PhiUp, Axis::ThetaUp, EnvironmentPreset::Urban),
        (UserKind::Ground, Axis::PhiDown, Axis::ThetaDown, EnvironmentPreset::Highrise),
    ] {
        for theta in [10.0, 14.0, 18.0] {
            for h_bs in [30.0, 50.0] {
                out.push(FigureSpec {
                    id: format!("{user}_{axis}_{tilt_axis}{theta}_hbs{h_bs}"),
                    description: format!(
                        "{user} coverage vs beamwidth, {tilt_axis} = {theta} deg, h_bs = {h_bs} m, {env}"
                    ),
                    fixed: vec![(tilt_axis, theta), (Axis::HBs, h_bs)],
                    sweep: spec(axis, linspace(4.0, 20.0, 4.0), vec![env.named()], user),
                });
            }
        }
    }
    for theta in linspace(10.0, 20.0, 2.0) {
        out.push(FigureSpec {
            id: format!("aerial_h_aerial_theta_up{theta}"),
            description: format!("aerial coverage vs aerial height, theta_up = {theta} deg, urban"),
            fixed: vec![(Axis::ThetaUp, theta)],
            sweep: spec(
                Axis::HAerial,
                linspace(60.0, 200.0, 20.0),
                vec![EnvironmentPreset::Urban.named()],
                UserKind::Aerial,
            ),
        });
    }
    out
}

#[derive(Serialize)]
struct Provenance<'a> {
    figures: Vec<ProvenanceEntry<'a>>,
}

#[derive(Serialize)]
struct ProvenanceEntry<'a> {
    file: String,
    description: &'a str,
    fixed: &'a [(Axis, f64)],
    base_config: SystemConfig,
    sweep: &'a SweepSpec,
}

/// Runs every spec and writes `<id>.csv|json` plus `provenance.json` into
/// `dir`.
pub fn write_figures(specs: &[FigureSpec], dir: &Path, format: OutputFormat) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for spec in specs {
        log::info!("figure {}", spec.id);
        let rows = spec.run()?;
        let file = format!("{}.{}", spec.id, format.extension());
        let w = BufWriter::new(File::create(dir.join(&file))?);
        match format {
            OutputFormat::Csv => write_csv(&rows, w)?,
            OutputFormat::Json => write_json(&rows, w)?,
        }
        entries.push(ProvenanceEntry {
            file,
            description: &spec.description,
            fixed: &spec.fixed,
            base_config: spec.base_config(),
            sweep: &spec.sweep,
        });
    }
    let w = BufWriter::new(File::create(dir.join("provenance.json"))?);
    serde_json::to_writer_pretty(w, &Provenance { figures: entries })?;
    Ok(())
}
