//! Parameter sweeps and the pulse-schedule optimizer.
//!
//! Every grid point is evaluated independently on the rayon pool and results
//! are gathered in input order, so output is identical for any thread count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{thermal_state, Laser, RateConstants, StateVector};
use crate::observables::ReadoutConfig;
use crate::propagator::{Accumulator, AugmentedPropagator};
use crate::sequence::{
    check_pulse_width, check_wait, make_pulse_train, LoopRecord, PumpModel, SteadyStateSettings,
};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const T_S_RANGE: (f64, f64) = (0.1, 1000.0);
pub const T_W_RANGE: (f64, f64) = (0.0, 1e4);
pub const N_RANGE: (usize, usize) = (1, 100_000);
/// Exclusive lower bound, inclusive upper bound.
pub const POWER_RANGE: (f64, f64) = (0.0, 100.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "t_s")]
    PulseWidth,
    #[serde(rename = "t_w")]
    Wait,
    #[serde(rename = "n")]
    Loops,
    #[serde(rename = "power_scale")]
    PowerScale,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::PulseWidth => "t_s",
            SweepVariable::Wait => "t_w",
            SweepVariable::Loops => "n",
            SweepVariable::PowerScale => "power_scale",
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVariable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ts" | "t_s" => Ok(SweepVariable::PulseWidth),
            "tw" | "t_w" => Ok(SweepVariable::Wait),
            "n" => Ok(SweepVariable::Loops),
            "power" | "power_scale" => Ok(SweepVariable::PowerScale),
            other => Err(format!(
                "unknown sweep variable `{other}` (expected ts, tw, n or power)"
            )),
        }
    }
}

/// Values held fixed while one of them is swept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedParams {
    pub t_s: f64,
    pub t_w: f64,
    pub n: usize,
    pub power_scale: f64,
}

impl Default for FixedParams {
    fn default() -> Self {
        FixedParams {
            t_s: 4.0,
            t_w: 150.0,
            n: 400,
            power_scale: 1.0,
        }
    }
}

fn in_range(what: &'static str, v: f64, lo: f64, hi: f64, lo_open: bool) -> Result<()> {
    let ok = v.is_finite() && v <= hi && if lo_open { v > lo } else { v >= lo };
    if ok {
        Ok(())
    } else {
        let constraint = match what {
            "t_s" => "in [0.1, 1000] ns",
            "t_w" => "in [0, 10000] ns",
            "n" => "an integer in [1, 100000]",
            _ => "in (0, 100]",
        };
        Err(Error::BadParameter {
            what,
            constraint,
            value: v,
        })
    }
}

fn check_value(var: SweepVariable, v: f64) -> Result<()> {
    match var {
        SweepVariable::PulseWidth => in_range("t_s", v, T_S_RANGE.0, T_S_RANGE.1, false),
        SweepVariable::Wait => in_range("t_w", v, T_W_RANGE.0, T_W_RANGE.1, false),
        SweepVariable::Loops => {
            if v.fract() != 0.0 {
                return Err(Error::BadParameter {
                    what: "n",
                    constraint: "an integer in [1, 100000]",
                    value: v,
                });
            }
            in_range("n", v, N_RANGE.0 as f64, N_RANGE.1 as f64, false)
        }
        SweepVariable::PowerScale => in_range("power_scale", v, POWER_RANGE.0, POWER_RANGE.1, true),
    }
}

impl FixedParams {
    pub fn validate(&self) -> Result<()> {
        check_value(SweepVariable::PulseWidth, self.t_s)?;
        check_value(SweepVariable::Wait, self.t_w)?;
        check_value(SweepVariable::Loops, self.n as f64)?;
        check_value(SweepVariable::PowerScale, self.power_scale)
    }

    fn with(mut self, var: SweepVariable, v: f64) -> Self {
        match var {
            SweepVariable::PulseWidth => self.t_s = v,
            SweepVariable::Wait => self.t_w = v,
            SweepVariable::Loops => self.n = v as usize,
            SweepVariable::PowerScale => self.power_scale = v,
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub fixed: FixedParams,
    pub readout: ReadoutConfig,
    /// Attach loop-by-loop polarization and transfer to every row.
    pub per_loop: bool,
}

impl SweepSpec {
    pub fn new(variable: SweepVariable, values: Vec<f64>) -> Self {
        SweepSpec {
            variable,
            values,
            fixed: FixedParams::default(),
            readout: ReadoutConfig::default(),
            per_loop: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::BadParameter {
                what: "sweep values",
                constraint: "nonempty",
                value: 0.0,
            });
        }
        self.fixed.validate()?;
        self.readout.validate()?;
        for &v in &self.values {
            check_value(self.variable, v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub polarization: f64,
    pub contrast: f64,
    /// Singlet dwell of one loop, ns: the steady-state loop for fixed-point
    /// sweeps, the mean loop for fixed-N runs.
    pub singlet_dwell: f64,
    pub loops_to_converge: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_loop: Option<Vec<LoopRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub rates: RateConstants,
    pub steady_state: SteadyStateSettings,
    pub fixed: FixedParams,
    pub readout: ReadoutConfig,
    pub engine_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub rows: Vec<SweepRow>,
    pub provenance: Provenance,
}

/// Laser power enters only through the pump rates.
pub fn power_scale(rates: &RateConstants, s: f64) -> Result<RateConstants> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::BadParameter {
            what: "power scale",
            constraint: "> 0",
            value: s,
        });
    }
    Ok(RateConstants {
        k13: rates.k13 * s,
        k24: rates.k24 * s,
        ..*rates
    })
}

/// Singlet dwell accumulated over one loop starting from `p`.
pub fn loop_dwell(model: &PumpModel, p: &StateVector, t_s: f64, t_w: f64) -> Result<f64> {
    let w = [Accumulator::singlet_dwell().weights];
    let mut acc = [Accumulator::singlet_dwell()];
    let pulse = AugmentedPropagator::new(model.generator(Laser::On), t_s, &w)?;
    let wait = AugmentedPropagator::new(model.generator(Laser::Off), t_w, &w)?;
    let mid = pulse.apply(p, &mut acc)?;
    wait.apply(&mid, &mut acc)?;
    Ok(acc[0].value)
}

fn evaluate(base: &PumpModel, spec: &SweepSpec, value: f64) -> Result<SweepRow> {
    let params = spec.fixed.with(spec.variable, value);
    let model = if params.power_scale == 1.0 {
        base.clone()
    } else {
        PumpModel::new(power_scale(base.rates(), params.power_scale)?)?.with_settings(*base.settings())?
    };

    let fixed_n = matches!(spec.variable, SweepVariable::Loops | SweepVariable::PowerScale);
    let (state, dwell, loops, per_loop) = if fixed_n {
        let train = make_pulse_train(params.t_s, params.t_w, params.n)?;
        let run = model.run_schedule(&train, &thermal_state(), spec.per_loop)?;
        (
            run.final_state,
            run.singlet_dwell / params.n as f64,
            run.converged_at,
            run.per_loop,
        )
    } else {
        let (p, n) = model.steady_state(params.t_s, params.t_w)?;
        let dwell = loop_dwell(&model, &p, params.t_s, params.t_w)?;
        let per_loop = if spec.per_loop {
            let train = make_pulse_train(params.t_s, params.t_w, n)?;
            model.run_schedule(&train, &thermal_state(), true)?.per_loop
        } else {
            None
        };
        (p, dwell, Some(n), per_loop)
    };

    let ground = model.relax_to_ground(&state)?;
    let contrast = model.rabi_contrast(&ground, &spec.readout)?.contrast;
    Ok(SweepRow {
        value,
        polarization: state.polarization(),
        contrast,
        singlet_dwell: dwell,
        loops_to_converge: loops,
        per_loop,
    })
}

/// Runs every grid point of `spec`. Fixed-point sweeps (`t_s`, `t_w`) use the
/// loop-map fixed point; `n` and `power_scale` sweeps run the finite train
/// of `fixed.n` loops from the thermal state.
pub fn sweep(model: &PumpModel, spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let rows = spec
        .values
        .par_iter()
        .map(|&v| evaluate(model, spec, v).map_err(|e| e.at(spec.variable.name(), v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        variable: spec.variable,
        rows,
        provenance: Provenance {
            rates: *model.rates(),
            steady_state: *model.settings(),
            fixed: spec.fixed,
            readout: spec.readout,
            engine_version: ENGINE_VERSION.to_string(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellPoint {
    pub t_s: f64,
    /// Singlet dwell of one steady-state loop, ns.
    pub dwell: f64,
    pub polarization: f64,
}

pub fn dwell_vs_polarization(model: &PumpModel, t_s_values: &[f64], t_w: f64) -> Result<Vec<DwellPoint>> {
    check_value(SweepVariable::Wait, t_w)?;
    t_s_values
        .par_iter()
        .map(|&t_s| {
            let point = || -> Result<DwellPoint> {
                check_value(SweepVariable::PulseWidth, t_s)?;
                let (p, _) = model.steady_state(t_s, t_w)?;
                Ok(DwellPoint {
                    t_s,
                    dwell: loop_dwell(model, &p, t_s, t_w)?,
                    polarization: p.polarization(),
                })
            };
            point().map_err(|e| e.at("t_s", t_s))
        })
        .collect()
}

/// Least-squares line `y = intercept + slope·x` with its R².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r_squared = if sxx > 0.0 && syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        0.0
    };
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub t_s: f64,
    pub t_w: f64,
    pub polarization: f64,
    /// Best coarse-grid candidate, kept for comparison.
    pub grid_best: f64,
    pub evaluations: usize,
}

pub const OPTIMIZER_GRID: usize = 16;
/// Golden-section refinement stops once the bracket is narrower than this.
pub const OPTIMIZER_RESOLUTION: f64 = 0.1;
const MAX_REFINE_ROUNDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    t_s: f64,
    t_w: f64,
    pol: f64,
}

impl Candidate {
    /// Higher polarization wins; ties go to smaller `t_s`, then smaller `t_w`.
    fn beats(&self, other: &Candidate) -> bool {
        if self.pol != other.pol {
            return self.pol > other.pol;
        }
        (self.t_s, self.t_w) < (other.t_s, other.t_w)
    }
}

fn check_bounds(what: &'static str, (lo, hi): (f64, f64), var: SweepVariable) -> Result<()> {
    check_value(var, lo)?;
    check_value(var, hi)?;
    if lo > hi {
        return Err(Error::BadParameter {
            what,
            constraint: "a nonempty interval (lo ≤ hi)",
            value: hi - lo,
        });
    }
    Ok(())
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if lo == hi {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Maximizes steady-state polarization over a box of `(t_s, t_w)`.
///
/// Coarse 16×16 grid, then alternating golden-section line searches in
/// `t_s` and `t_w` around the incumbent down to 0.1 ns brackets. The
/// incumbent is only ever replaced by a strictly better point, so the result
/// is never worse than the best grid point.
pub fn optimize_schedule(
    model: &PumpModel,
    t_s_bounds: (f64, f64),
    t_w_bounds: (f64, f64),
) -> Result<Optimum> {
    check_bounds("t_s bounds", t_s_bounds, SweepVariable::PulseWidth)?;
    check_bounds("t_w bounds", t_w_bounds, SweepVariable::Wait)?;

    let eval = |t_s: f64, t_w: f64| -> Result<Candidate> {
        check_pulse_width(t_s)?;
        check_wait(t_w)?;
        let (p, _) = model.steady_state(t_s, t_w).map_err(|e| e.at("t_s", t_s))?;
        Ok(Candidate {
            t_s,
            t_w,
            pol: p.polarization(),
        })
    };

    let ts_grid = linspace(t_s_bounds.0, t_s_bounds.1, OPTIMIZER_GRID);
    let tw_grid = linspace(t_w_bounds.0, t_w_bounds.1, OPTIMIZER_GRID);
    let grid: Vec<(f64, f64)> = ts_grid
        .iter()
        .flat_map(|&s| tw_grid.iter().map(move |&w| (s, w)))
        .collect();
    let scored = grid
        .par_iter()
        .map(|&(s, w)| eval(s, w))
        .collect::<Result<Vec<_>>>()?;
    let mut evaluations = scored.len();
    let mut best = scored[0];
    for c in &scored[1..] {
        if c.beats(&best) {
            best = *c;
        }
    }
    let grid_best = best.pol;

    let ts_cell = step_of(&ts_grid);
    let tw_cell = step_of(&tw_grid);
    for _ in 0..MAX_REFINE_ROUNDS {
        let before = best;
        if ts_cell > 0.0 {
            let lo = (best.t_s - ts_cell).max(t_s_bounds.0);
            let hi = (best.t_s + ts_cell).min(t_s_bounds.1);
            let tw = best.t_w;
            let (c, n) = golden_section(lo, hi, |s| eval(s, tw))?;
            evaluations += n;
            if c.beats(&best) {
                best = c;
            }
        }
        if tw_cell > 0.0 {
            let lo = (best.t_w - tw_cell).max(t_w_bounds.0);
            let hi = (best.t_w + tw_cell).min(t_w_bounds.1);
            let ts = best.t_s;
            let (c, n) = golden_section(lo, hi, |w| eval(ts, w))?;
            evaluations += n;
            if c.beats(&best) {
                best = c;
            }
        }
        if best == before {
            break;
        }
    }

    Ok(Optimum {
        t_s: best.t_s,
        t_w: best.t_w,
        polarization: best.pol,
        grid_best,
        evaluations,
    })
}

fn step_of(grid: &[f64]) -> f64 {
    if grid.len() < 2 {
        0.0
    } else {
        grid[1] - grid[0]
    }
}

/// Golden-section search for a maximum on `[lo, hi]`. Returns the best point
/// evaluated (bracket ends included) and the number of evaluations.
fn golden_section<F>(mut lo: f64, mut hi: f64, f: F) -> Result<(Candidate, usize)>
where
    F: Fn(f64) -> Result<Candidate>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut best = f(lo)?;
    let consider = |c: Candidate, best: &mut Candidate| {
        if c.beats(best) {
            *best = c;
        }
    };
    consider(f(hi)?, &mut best);
    let mut evals = 2;

    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    evals += 2;
    consider(f1, &mut best);
    consider(f2, &mut best);
    while hi - lo > OPTIMIZER_RESOLUTION {
        if f1.pol >= f2.pol {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
            consider(f1, &mut best);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
            consider(f2, &mut best);
        }
        evals += 1;
    }
    Ok((best, evals))
}
