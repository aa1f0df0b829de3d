//! Command-line front end: config ingestion, subcommand dispatch and result
//! serialization. [`run`] is the whole program; `main` only forwards argv
//! and the exit code.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nvpump_core::{SweepVariable, ENGINE_VERSION};
use serde_json::{json, Value};

pub mod commands;
pub mod config;
pub mod figures;
pub mod output;

use config::{parse_config, Format, RunConfig};
use output::{emit, render, round_value, Report};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: {message}")]
    Compute { stage: &'static str, message: String },
    #[error("output: {path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn output(path: impl AsRef<Path>, e: impl fmt::Display) -> Self {
        CliError::Output {
            path: path.as_ref().display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn at_stage(stage: &'static str, message: impl Into<String>) -> Self {
        CliError::Compute {
            stage,
            message: message.into(),
        }
    }

    /// Adapter for `map_err` on engine results.
    pub fn stage(stage: &'static str) -> impl Fn(nvpump_core::Error) -> CliError + Copy {
        move |e| CliError::at_stage(stage, e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Compute { .. } | CliError::Output { .. } => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "nvpump",
    version,
    about = "Optical pumping simulator for the N-V center six-level model"
)]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (directory for `figures`). Defaults to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for sweeps and figures.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides for the configured fixed parameters.
#[derive(Debug, Clone, Default, Args)]
pub struct FixedArgs {
    /// Pulse width, ns.
    #[arg(long, allow_negative_numbers = true)]
    pub ts: Option<f64>,
    /// Wait after each pulse, ns.
    #[arg(long, allow_negative_numbers = true)]
    pub tw: Option<f64>,
    /// Number of loops.
    #[arg(long)]
    pub n: Option<usize>,
    /// Laser power relative to the rate table.
    #[arg(long, allow_negative_numbers = true)]
    pub power: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one pulse train from the thermal state and emit its trajectory.
    Simulate {
        #[command(flatten)]
        fixed: FixedArgs,
        /// Trajectory sample spacing, ns.
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        sample_dt: f64,
        /// Include per-loop transfer records (JSON only).
        #[arg(long)]
        per_loop: bool,
    },
    /// Saturated state of one (t_s, t_w) train.
    Steady {
        #[command(flatten)]
        fixed: FixedArgs,
    },
    /// Sweep one parameter.
    Sweep {
        /// ts, tw, n or power.
        #[arg(long)]
        var: SweepVariable,
        /// Comma-separated grid.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
        #[command(flatten)]
        fixed: FixedArgs,
        /// Include per-loop records for every row (JSON only).
        #[arg(long)]
        per_loop: bool,
    },
    /// Polarize, then sweep the microwave rotation and fit the contrast.
    Rabi {
        #[command(flatten)]
        fixed: FixedArgs,
        #[arg(long, default_value_t = nvpump_core::observables::DEFAULT_RABI_POINTS)]
        points: usize,
        /// Readout window, ns.
        #[arg(long, allow_negative_numbers = true)]
        t_read: Option<f64>,
    },
    /// Maximize steady polarization over a (t_s, t_w) box.
    Optimize {
        #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
        ts_min: f64,
        #[arg(long, default_value_t = 200.0, allow_negative_numbers = true)]
        ts_max: f64,
        #[arg(long, default_value_t = 100.0, allow_negative_numbers = true)]
        tw_min: f64,
        #[arg(long, default_value_t = 350.0, allow_negative_numbers = true)]
        tw_max: f64,
        #[arg(long, allow_negative_numbers = true)]
        power: Option<f64>,
    },
    /// Write every figure dataset into the output directory.
    Figures {
        #[command(flatten)]
        fixed: FixedArgs,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Steady { .. } => "steady",
            Command::Sweep { .. } => "sweep",
            Command::Rabi { .. } => "rabi",
            Command::Optimize { .. } => "optimize",
            Command::Figures { .. } => "figures",
        }
    }
}

pub const DEFAULT_FIGURES_DIR: &str = "figures";

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
            parse_config(&text).map_err(|e| match e {
                CliError::Config(m) => CliError::config(format!("{}: {m}", p.display())),
                other => other,
            })
        }
    }
}

fn apply_fixed(cfg: &mut RunConfig, f: &FixedArgs) {
    if let Some(v) = f.ts {
        cfg.fixed.t_s = v;
    }
    if let Some(v) = f.tw {
        cfg.fixed.t_w = v;
    }
    if let Some(v) = f.n {
        cfg.fixed.n = v;
    }
    if let Some(v) = f.power {
        cfg.fixed.power_scale = v;
    }
}

/// Config file, then command-line overrides, validated before any work.
pub fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if let Some(p) = &cli.out {
        cfg.output.path = Some(p.clone());
    }
    match &cli.command {
        Command::Simulate { fixed, .. }
        | Command::Steady { fixed }
        | Command::Sweep { fixed, .. }
        | Command::Figures { fixed }
        | Command::Rabi { fixed, .. } => apply_fixed(&mut cfg, fixed),
        Command::Optimize { power, .. } => apply_fixed(
            &mut cfg,
            &FixedArgs {
                power: *power,
                ..FixedArgs::default()
            },
        ),
    }
    if let Command::Rabi { t_read: Some(t), .. } = &cli.command {
        cfg.fixed.t_read = *t;
    }
    cfg.validate().map_err(|e| match e {
        CliError::Config(m) => CliError::Usage(m),
        other => other,
    })?;
    Ok(cfg)
}

fn meta(command: &str, cfg: &RunConfig, extra: Value) -> Value {
    round_value(json!({
        "command": command,
        "engine_version": ENGINE_VERSION,
        "config": cfg,
        "tolerances": cfg.tolerances,
        "args": extra,
    }))
}

fn per_loop_needs_json(per_loop: bool, cfg: &RunConfig) -> Result<(), CliError> {
    if per_loop && cfg.output.format == Format::Csv {
        return Err(CliError::Usage("--per-loop output needs --format json".into()));
    }
    Ok(())
}

fn write_one(report: &Report, cfg: &RunConfig, meta: &Value) -> Result<(), CliError> {
    emit(
        &render(report, cfg.output.format, meta),
        cfg.output.path.as_deref(),
    )
}

/// Executes a parsed command line.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(cli)?;
    let name = cli.command.name();
    let model = || cfg.model().map_err(CliError::stage(name));

    match &cli.command {
        Command::Simulate {
            sample_dt, per_loop, ..
        } => {
            per_loop_needs_json(*per_loop, &cfg)?;
            if !(sample_dt.is_finite() && *sample_dt > 0.0) {
                return Err(CliError::Usage(format!(
                    "--sample-dt must be > 0 ns (got {sample_dt})"
                )));
            }
            let f = &cfg.fixed;
            let out = commands::simulate(&model()?, f.t_s, f.t_w, f.n, *sample_dt, *per_loop)?;
            write_one(
                &commands::simulate_report(&out),
                &cfg,
                &meta(name, &cfg, json!({ "sample_dt": sample_dt })),
            )?;
            eprintln!("{}", commands::simulate_summary(&out));
        }
        Command::Steady { .. } => {
            let out = commands::steady(&model()?, cfg.fixed.t_s, cfg.fixed.t_w)?;
            write_one(&commands::steady_report(&out), &cfg, &meta(name, &cfg, json!({})))?;
        }
        Command::Sweep {
            var,
            values,
            per_loop,
            ..
        } => {
            per_loop_needs_json(*per_loop, &cfg)?;
            let spec = commands::spec_for(&cfg, *var, values.clone(), *per_loop);
            spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let base = cfg.base_model().map_err(CliError::stage(name))?;
            let res = commands::run_sweep(&base, &spec)?;
            let extra = json!({ "variable": var, "values": values, "per_loop": per_loop });
            write_one(&commands::sweep_report(&res), &cfg, &meta(name, &cfg, extra))?;
        }
        Command::Rabi { points, .. } => {
            let out = commands::rabi(&model()?, &cfg, cfg.fixed.t_s, cfg.fixed.t_w, *points)?;
            write_one(
                &commands::rabi_report(&out),
                &cfg,
                &meta(name, &cfg, json!({ "points": points })),
            )?;
            eprintln!("{}", commands::rabi_summary(&out));
        }
        Command::Optimize {
            ts_min,
            ts_max,
            tw_min,
            tw_max,
            ..
        } => {
            let opt = commands::optimize(&model()?, (*ts_min, *ts_max), (*tw_min, *tw_max))?;
            let extra = json!({ "t_s_bounds": [ts_min, ts_max], "t_w_bounds": [tw_min, tw_max] });
            write_one(&commands::optimize_report(&opt), &cfg, &meta(name, &cfg, extra))?;
        }
        Command::Figures { .. } => {
            let dir = cfg
                .output
                .path
                .clone()
                .unwrap_or_else(|| PathBuf::from(DEFAULT_FIGURES_DIR));
            let reports = figures::figures(&cfg)?;
            // All work is done; write files from this thread only.
            for (fig, report) in &reports {
                let path = dir.join(format!("{fig}.{}", cfg.output.format.extension()));
                let text = render(
                    report,
                    cfg.output.format,
                    &meta(name, &cfg, json!({ "figure": fig })),
                );
                emit(&text, Some(&path))?;
            }
            eprintln!("figures: wrote {} files to {}", reports.len(), dir.display());
        }
    }
    Ok(())
}

/// Parses `argv` (program name first), runs, and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };

    let result = match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be ≥ 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(CliError::Usage(format!("cannot start {n} threads: {e}"))),
        },
        None => execute(&cli),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
