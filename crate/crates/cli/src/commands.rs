//! One function per subcommand. Each returns the dataset to write plus a
//! short human summary for stderr.

use nvpump_core::{
    linear_fit, make_pulse_train, optimize_schedule, sample_trajectory, sweep, thermal_state, DwellPoint,
    LoopRecord, Optimum, PumpModel, RabiCurve, SimulationResult, StateVector, SweepResult, SweepSpec,
    SweepVariable,
};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{to_rounded, Cell, Report, Table};
use crate::CliError;

pub const STATE_COLUMNS: [&str; 6] = ["p1", "p2", "p3", "p4", "p5", "p6"];

fn state_cells(p: &StateVector) -> impl Iterator<Item = Cell> + '_ {
    p.populations().iter().map(|&x| Cell::Num(x))
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub segment: usize,
    pub state: StateVector,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateOutput {
    pub t_s: f64,
    pub t_w: f64,
    pub n: usize,
    pub result: SimulationResult,
    pub trajectory: Vec<TrajectoryPoint>,
}

/// Runs an `n`-loop train from the thermal state, sampling every
/// `sample_dt` ns and at every segment boundary.
pub fn simulate(
    model: &PumpModel,
    t_s: f64,
    t_w: f64,
    n: usize,
    sample_dt: f64,
    per_loop: bool,
) -> Result<SimulateOutput, CliError> {
    let stage = CliError::stage("simulate");
    let train = make_pulse_train(t_s, t_w, n).map_err(stage)?;
    let result = model
        .run_schedule(&train, &thermal_state(), per_loop)
        .map_err(stage)?;

    let mut trajectory = vec![TrajectoryPoint {
        t: 0.0,
        segment: 0,
        state: thermal_state(),
    }];
    let mut state = thermal_state();
    let mut t0 = 0.0;
    for (i, seg) in train.segments().iter().enumerate() {
        if seg.duration == 0.0 {
            continue;
        }
        let g = model.generator(seg.laser);
        let samples = sample_trajectory(g, &state, seg.duration, sample_dt).map_err(stage)?;
        for (t, p) in samples.into_iter().skip(1) {
            trajectory.push(TrajectoryPoint {
                t: t0 + t,
                segment: i + 1,
                state: p,
            });
        }
        state = trajectory.last().unwrap().state;
        t0 += seg.duration;
    }
    Ok(SimulateOutput {
        t_s,
        t_w,
        n,
        result,
        trajectory,
    })
}

pub fn simulate_report(out: &SimulateOutput) -> Report {
    let mut table = Table::new(["t_ns", "segment", "laser"].into_iter().chain(STATE_COLUMNS));
    for pt in &out.trajectory {
        // Odd segments are pulses; the initial sample sits before any.
        let laser = if pt.segment % 2 == 1 { "on" } else { "off" };
        let mut row = vec![Cell::Num(pt.t), Cell::from(pt.segment), Cell::from(laser)];
        row.extend(state_cells(&pt.state));
        table.push(row);
    }
    Report {
        table,
        data: to_rounded(out),
    }
}

pub fn simulate_summary(out: &SimulateOutput) -> String {
    format!(
        "simulate: t_s = {} ns, t_w = {} ns, N = {}: polarization {:.9}, singlet dwell {:.6} ns, photons {:.6}",
        out.t_s, out.t_w, out.n, out.result.polarization, out.result.singlet_dwell, out.result.photon_integral
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadyOutput {
    pub t_s: f64,
    pub t_w: f64,
    pub state: StateVector,
    pub polarization: f64,
    pub loops_used: usize,
    /// Linear-solve fixed point, for cross-checking.
    pub eigen_state: StateVector,
}

pub fn steady(model: &PumpModel, t_s: f64, t_w: f64) -> Result<SteadyOutput, CliError> {
    let stage = CliError::stage("steady");
    let (state, loops_used) = model.steady_state(t_s, t_w).map_err(stage)?;
    let eigen_state = model.steady_state_eigen(t_s, t_w).map_err(stage)?;
    Ok(SteadyOutput {
        t_s,
        t_w,
        state,
        polarization: state.polarization(),
        loops_used,
        eigen_state,
    })
}

pub fn steady_report(out: &SteadyOutput) -> Report {
    let mut table = Table::new(
        ["t_s", "t_w"]
            .into_iter()
            .chain(STATE_COLUMNS)
            .chain(["polarization", "loops_used"]),
    );
    let mut row = vec![Cell::Num(out.t_s), Cell::Num(out.t_w)];
    row.extend(state_cells(&out.state));
    row.extend([Cell::Num(out.polarization), Cell::from(out.loops_used)]);
    table.push(row);
    Report {
        table,
        data: to_rounded(out),
    }
}

pub const SWEEP_COLUMNS: [&str; 5] = [
    "value",
    "polarization",
    "contrast",
    "singlet_dwell_ns",
    "loops_to_converge",
];

pub fn run_sweep(model: &PumpModel, spec: &SweepSpec) -> Result<SweepResult, CliError> {
    sweep(model, spec).map_err(CliError::stage("sweep"))
}

pub fn sweep_report(res: &SweepResult) -> Report {
    let mut header = SWEEP_COLUMNS.map(String::from).to_vec();
    header[0] = res.variable.name().to_string();
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for r in &res.rows {
        table.push(vec![
            Cell::Num(r.value),
            Cell::Num(r.polarization),
            Cell::Num(r.contrast),
            Cell::Num(r.singlet_dwell),
            Cell::from(r.loops_to_converge),
        ]);
    }
    Report {
        table,
        data: to_rounded(res),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RabiOutput {
    pub t_s: f64,
    pub t_w: f64,
    pub polarization: f64,
    /// Ground-only state the rotation is applied to.
    pub ground_state: StateVector,
    pub curve: RabiCurve,
}

/// Polarizes to the `(t_s, t_w)` fixed point, lets the leftover excited and
/// singlet population decay, then sweeps the microwave rotation.
pub fn rabi(
    model: &PumpModel,
    cfg: &RunConfig,
    t_s: f64,
    t_w: f64,
    points: usize,
) -> Result<RabiOutput, CliError> {
    let stage = CliError::stage("rabi");
    let (p, _) = model.steady_state(t_s, t_w).map_err(stage)?;
    let ground_state = model.relax_to_ground(&p).map_err(stage)?;
    let curve = model
        .rabi_contrast_with(&ground_state, &cfg.readout(), points)
        .map_err(stage)?;
    Ok(RabiOutput {
        t_s,
        t_w,
        polarization: p.polarization(),
        ground_state,
        curve,
    })
}

pub fn rabi_report(out: &RabiOutput) -> Report {
    let mut table = Table::new(["theta_rad", "counts", "fit"]);
    for pt in &out.curve.points {
        let fit = out.curve.offset + out.curve.amplitude * pt.theta.cos();
        table.push(vec![Cell::Num(pt.theta), Cell::Num(pt.counts), Cell::Num(fit)]);
    }
    Report {
        table,
        data: to_rounded(out),
    }
}

pub fn rabi_summary(out: &RabiOutput) -> String {
    format!(
        "rabi: polarization {:.9}, contrast {:.9} (I_max {:.6}, I_min {:.6})",
        out.polarization, out.curve.contrast, out.curve.i_max, out.curve.i_min
    )
}

pub fn optimize(model: &PumpModel, ts: (f64, f64), tw: (f64, f64)) -> Result<Optimum, CliError> {
    optimize_schedule(model, ts, tw).map_err(CliError::stage("optimize"))
}

pub fn optimize_report(opt: &Optimum) -> Report {
    let mut table = Table::new(["t_s", "t_w", "polarization", "grid_best", "evaluations"]);
    table.push(vec![
        Cell::Num(opt.t_s),
        Cell::Num(opt.t_w),
        Cell::Num(opt.polarization),
        Cell::Num(opt.grid_best),
        Cell::from(opt.evaluations),
    ]);
    Report {
        table,
        data: to_rounded(opt),
    }
}

/// Per-loop records for several pulse widths, side by side.
#[derive(Debug, Clone, Serialize)]
pub struct LoopSeries {
    pub t_s: f64,
    pub t_w: f64,
    pub loops: Vec<LoopRecord>,
}

pub fn loop_series(model: &PumpModel, t_s: f64, t_w: f64, n: usize) -> nvpump_core::Result<LoopSeries> {
    let run = model.run_schedule(&make_pulse_train(t_s, t_w, n)?, &thermal_state(), true)?;
    Ok(LoopSeries {
        t_s,
        t_w,
        loops: run.per_loop.unwrap_or_default(),
    })
}

pub fn ts_label(t_s: f64) -> String {
    format!("ts{}", crate::output::fmt_num(t_s))
}

/// `polarization vs dwell` line through a `t_s` sweep.
pub fn dwell_fit_report(points: &[DwellPoint]) -> Report {
    let x: Vec<f64> = points.iter().map(|p| p.dwell).collect();
    let y: Vec<f64> = points.iter().map(|p| p.polarization).collect();
    let fit = linear_fit(&x, &y);
    let mut table = Table::new(["t_s", "singlet_dwell_ns", "polarization", "fit_polarization"]);
    for p in points {
        table.push(vec![
            Cell::Num(p.t_s),
            Cell::Num(p.dwell),
            Cell::Num(p.polarization),
            Cell::Num(fit.intercept + fit.slope * p.dwell),
        ]);
    }
    Report {
        table,
        data: to_rounded(&json!({ "points": points, "fit": fit })),
    }
}

/// Sweep spec with the configured fixed parameters.
pub fn spec_for(cfg: &RunConfig, variable: SweepVariable, values: Vec<f64>, per_loop: bool) -> SweepSpec {
    SweepSpec {
        variable,
        values,
        fixed: cfg.fixed_params(),
        readout: cfg.readout(),
        per_loop,
    }
}
