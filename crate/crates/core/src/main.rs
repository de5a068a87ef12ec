use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tiltcov::analytic::{Method, QuadratureSpec};
use tiltcov::cli::{
    self, default_scenarios, delta_scenarios, figure_specs, run_sweep, run_validation, write_csv,
    write_figures, write_json, Axis, ConfigFile, EnvChoice, EnvironmentPreset, NamedEnvironment,
    OutputFormat, SweepRow, SweepSpec,
};
use tiltcov::model::{SystemConfig, UserKind};
use tiltcov::montecarlo::McSettings;

#[derive(Parser)]
#[command(
    name = "tiltcov",
    version,
    about = "SIR coverage of aerial and ground users with partially up-tilted base stations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coverage at a single configuration.
    Coverage(CommonArgs),
    /// Sweep one parameter over a grid.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// delta, theta_up, theta_down, phi_up, phi_down, h_bs or h_aerial.
        #[arg(long, default_value = "delta")]
        axis: Axis,
        /// `start:stop:step` or a comma-separated list; defaults per axis.
        #[arg(long)]
        grid: Option<String>,
        /// Comma-separated environments for the sweep (overrides --env).
        #[arg(long)]
        envs: Option<String>,
    },
    /// Compare the approximate analytic coverage against Monte Carlo.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        /// Maximum allowed |approx − mc| per scenario.
        #[arg(long, default_value_t = cli::DEFAULT_GATE)]
        gate: f64,
    },
    /// Write the standard set of coverage curves into a directory.
    Figures {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Flat key-value config file; keys not given keep the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// aerial or ground; `validate` runs both when omitted.
    #[arg(long)]
    user: Option<UserKind>,
    /// suburban, urban, dense-urban, highrise or custom.
    #[arg(long)]
    env: Option<EnvChoice>,
    /// Comma-separated subset of approx, exact, mc.
    #[arg(long, default_value = "approx")]
    methods: String,
    /// Monte Carlo realizations per point.
    #[arg(long, default_value_t = 100_000)]
    mc_n: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file (directory for `figures`); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Radius of the simulated network disk, also used as the analytic
    /// integration limit.
    #[arg(long, default_value_t = 30.0)]
    sim_radius_km: f64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Write wall_ms = 0 so that output is byte-reproducible.
    #[arg(long)]
    no_timing: bool,
}

impl CommonArgs {
    fn config_file(&self) -> Result<ConfigFile> {
        match &self.config {
            Some(p) => Ok(ConfigFile::read(p)?),
            None => Ok(ConfigFile::default()),
        }
    }

    fn resolve(&self) -> Result<(SystemConfig, NamedEnvironment)> {
        let r = self.config_file()?.resolve(self.env)?;
        Ok((r.config, r.environment))
    }

    fn methods(&self) -> Result<Vec<Method>> {
        cli::parse_methods(&self.methods).map_err(anyhow::Error::msg)
    }

    fn mc(&self) -> Result<McSettings> {
        if !(self.sim_radius_km > 0.0) {
            bail!("--sim-radius-km must be positive");
        }
        Ok(McSettings {
            n_realizations: self.mc_n,
            sim_radius: self.sim_radius_km * 1e3,
            master_seed: self.seed,
            threads: None,
        })
    }

    fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec {
            truncation_radius: self.sim_radius_km * 1e3,
            ..QuadratureSpec::default()
        }
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
            )),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn emit(&self, rows: &[SweepRow]) -> Result<()> {
        let mut w = self.writer()?;
        match self.format {
            OutputFormat::Csv => write_csv(rows, &mut w)?,
            OutputFormat::Json => write_json(rows, &mut w)?,
        }
        w.flush()?;
        Ok(())
    }
}

fn sweep_spec(
    common: &CommonArgs,
    axis: Axis,
    grid: Vec<f64>,
    environments: Vec<NamedEnvironment>,
) -> Result<SweepSpec> {
    Ok(SweepSpec {
        axis,
        grid,
        environments,
        user: common.user.unwrap_or(UserKind::Aerial),
        methods: common.methods()?,
        mc: common.mc()?,
        quadrature: common.quadrature(),
        timing: !common.no_timing,
    })
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Coverage(common) => {
            let (cfg, env) = common.resolve()?;
            let spec = sweep_spec(&common, Axis::Delta, vec![cfg.deployment.delta], vec![env])?;
            let rows = run_sweep(&spec, &cfg)?;
            common.emit(&rows)?;
            Ok(rows.iter().all(|r| r.error.is_none()))
        }
        Command::Sweep {
            common,
            axis,
            grid,
            envs,
        } => {
            let (cfg, env) = common.resolve()?;
            let environments = match envs {
                Some(list) => list
                    .split(',')
                    .map(|s| s.parse::<EnvironmentPreset>().map(|p| p.named()))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(anyhow::Error::msg)?,
                None => vec![env],
            };
            let grid = match grid {
                Some(g) => cli::sweep::parse_grid(&g).map_err(anyhow::Error::msg)?,
                None => axis.default_grid(),
            };
            let rows = run_sweep(&sweep_spec(&common, axis, grid, environments)?, &cfg)?;
            common.emit(&rows)?;
            Ok(rows.iter().all(|r| r.error.is_none()))
        }
        Command::Validate { common, gate } => {
            let (cfg, env) = common.resolve()?;
            let users: Vec<UserKind> = common.user.map_or(UserKind::ALL.to_vec(), |u| vec![u]);
            let scenarios = if common.env.is_some() || common.config.is_some() {
                delta_scenarios(&cfg, &[env], &users)
            } else if users.len() == 2 {
                default_scenarios(&cfg)
            } else {
                let envs: Vec<_> = EnvironmentPreset::ALL.iter().map(|p| p.named()).collect();
                delta_scenarios(&cfg, &envs, &users)
            };
            let report = run_validation(&scenarios, &common.mc()?, &common.quadrature(), gate)?;
            let mut w = common.writer()?;
            match common.format {
                OutputFormat::Json => {
                    serde_json::to_writer_pretty(&mut w, &report)?;
                    writeln!(w)?;
                }
                OutputFormat::Csv => w.write_all(report.render().as_bytes())?,
            }
            w.flush()?;
            Ok(report.passed)
        }
        Command::Figures { common } => {
            let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("figures"));
            let specs = figure_specs(
                &common.methods()?,
                &common.mc()?,
                &common.quadrature(),
                !common.no_timing,
            );
            write_figures(&specs, &dir, common.format)?;
            eprintln!("wrote {} figure files to {}", specs.len(), dir.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = match &cli.command {
        Command::Coverage(c) => c.threads,
        Command::Sweep { common, .. }
        | Command::Validate { common, .. }
        | Command::Figures { common } => common.threads,
    };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
