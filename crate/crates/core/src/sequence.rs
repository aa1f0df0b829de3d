//! Pulse trains, their loop maps, fixed points, and per-loop ground-state
//! transfer.
//!
//! A train is `N` repetitions of a laser pulse of width `t_s` followed by a
//! dark wait `t_w`. One repetition is the linear map
//! `T = exp(M1·t_w)·exp(M0·t_s)`, and the saturated state of a long train is
//! the fixed point of `T`.

use std::collections::HashMap;

use nalgebra::{Matrix2x6, Matrix4, Matrix6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_generator, thermal_state, Generator, Laser, RateConstants, StateVector, LEVELS};
use crate::propagator::{apply_map, segment_propagator, Accumulator, AugmentedPropagator, CLAMP_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub laser: Laser,
    /// ns
    pub duration: f64,
}

impl Segment {
    pub fn on(duration: f64) -> Self {
        Segment {
            laser: Laser::On,
            duration,
        }
    }

    pub fn off(duration: f64) -> Self {
        Segment {
            laser: Laser::Off,
            duration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub t_s: f64,
    pub t_w: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    segments: Vec<Segment>,
    train: Option<TrainParams>,
}

impl PulseSchedule {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::BadParameter {
                what: "segment count",
                constraint: "≥ 1",
                value: 0.0,
            });
        }
        for s in &segments {
            if !(s.duration.is_finite() && s.duration >= 0.0) {
                return Err(Error::BadParameter {
                    what: "segment duration",
                    constraint: "finite and ≥ 0 ns",
                    value: s.duration,
                });
            }
        }
        Ok(PulseSchedule {
            segments,
            train: None,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Set when the schedule was built by [`make_pulse_train`].
    pub fn train(&self) -> Option<TrainParams> {
        self.train
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }
}

pub(crate) fn check_pulse_width(t_s: f64) -> Result<()> {
    if t_s.is_finite() && t_s > 0.0 {
        Ok(())
    } else {
        Err(Error::BadParameter {
            what: "t_s",
            constraint: "> 0 ns",
            value: t_s,
        })
    }
}

pub(crate) fn check_wait(t_w: f64) -> Result<()> {
    if t_w.is_finite() && t_w >= 0.0 {
        Ok(())
    } else {
        Err(Error::BadParameter {
            what: "t_w",
            constraint: "≥ 0 ns",
            value: t_w,
        })
    }
}

/// `n` loops of `(on, t_s), (off, t_w)`.
pub fn make_pulse_train(t_s: f64, t_w: f64, n: usize) -> Result<PulseSchedule> {
    check_pulse_width(t_s)?;
    check_wait(t_w)?;
    if n == 0 {
        return Err(Error::BadParameter {
            what: "N",
            constraint: "≥ 1",
            value: 0.0,
        });
    }
    let segments = (0..n)
        .flat_map(|_| [Segment::on(t_s), Segment::off(t_w)])
        .collect();
    Ok(PulseSchedule {
        segments,
        train: Some(TrainParams { t_s, t_w, n }),
    })
}

/// One train loop as a single column-stochastic map.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopPropagator {
    map: Matrix6<f64>,
    t_s: f64,
    t_w: f64,
    ground_projection: Matrix2x6<f64>,
}

impl LoopPropagator {
    /// `ground_projection` maps a state onto the ground populations it would
    /// reach after an infinitely long dark wait; see
    /// [`PumpModel::ground_projection`].
    pub fn new(map: Matrix6<f64>, t_s: f64, t_w: f64, ground_projection: Matrix2x6<f64>) -> Self {
        LoopPropagator {
            map,
            t_s,
            t_w,
            ground_projection,
        }
    }

    pub fn map(&self) -> &Matrix6<f64> {
        &self.map
    }

    pub fn t_s(&self) -> f64 {
        self.t_s
    }

    pub fn t_w(&self) -> f64 {
        self.t_w
    }

    pub fn ground_projection(&self) -> &Matrix2x6<f64> {
        &self.ground_projection
    }

    pub fn apply(&self, p: &StateVector) -> Result<StateVector> {
        apply_map(&self.map, p)
    }
}

/// Population transferred between the two ground levels during one loop:
/// `(P21, P12)`.
///
/// Destinations are read through the loop's ground projection, so
/// population that ends the loop in an excited or singlet level counts
/// toward the ground level it will relax into. Population that starts the
/// loop outside the ground levels contributes its net change of eventual
/// ground level. With these conventions `P21 - P12` equals the one-loop
/// change of the projected m_s = 0 population, which vanishes at a fixed
/// point of the loop map. When the loop starts and ends on ground levels
/// only, this reduces to `P21 = T[1,2]·P2` and `P12 = T[2,1]·P1`.
pub fn loop_transfer(p_start: &StateVector, lp: &LoopPropagator) -> (f64, f64) {
    let proj = lp.ground_projection();
    let eventual = proj * lp.map();
    let p = p_start.populations();

    let mut p21 = eventual[(0, 1)] * p[1];
    let mut p12 = eventual[(1, 0)] * p[0];
    for j in 2..LEVELS {
        let shift = (eventual[(0, j)] - proj[(0, j)]) * p[j];
        if shift > 0.0 {
            p21 += shift;
        } else {
            p12 -= shift;
        }
    }
    (p21, p12)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateSettings {
    /// ∞-norm change between consecutive loops that counts as converged.
    pub tol: f64,
    pub n_max: usize,
}

impl Default for SteadyStateSettings {
    fn default() -> Self {
        SteadyStateSettings {
            tol: 1e-10,
            n_max: 10_000,
        }
    }
}

impl SteadyStateSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::BadParameter {
                what: "steady-state tolerance",
                constraint: "> 0",
                value: self.tol,
            });
        }
        if self.n_max == 0 {
            return Err(Error::BadParameter {
                what: "n_max",
                constraint: "≥ 1",
                value: 0.0,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopRecord {
    /// 1-based.
    pub loop_index: usize,
    /// P1 at the end of the loop.
    pub polarization: f64,
    pub p21: f64,
    pub p12: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub final_state: StateVector,
    pub polarization: f64,
    /// ∫ (P5 + P6) dt over every pulse and wait, ns.
    pub singlet_dwell: f64,
    /// ∫ (k31·P3 + k42·P4) dt, emitted photons per center.
    pub photon_integral: f64,
    pub per_loop: Option<Vec<LoopRecord>>,
    /// First loop whose ∞-norm state change fell below the steady-state
    /// tolerance.
    pub converged_at: Option<usize>,
}

/// The rate model with its two generators prebuilt.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpModel {
    rates: RateConstants,
    laser_on: Generator,
    laser_off: Generator,
    ground_projection: Matrix2x6<f64>,
    settings: SteadyStateSettings,
}

impl PumpModel {
    pub fn new(rates: RateConstants) -> Result<Self> {
        let laser_on = build_generator(&rates, Laser::On)?;
        let laser_off = build_generator(&rates, Laser::Off)?;
        let ground_projection = dark_limit(&laser_off);
        Ok(PumpModel {
            rates,
            laser_on,
            laser_off,
            ground_projection,
            settings: SteadyStateSettings::default(),
        })
    }

    pub fn with_settings(mut self, settings: SteadyStateSettings) -> Result<Self> {
        settings.validate()?;
        self.settings = settings;
        Ok(self)
    }

    pub fn rates(&self) -> &RateConstants {
        &self.rates
    }

    pub fn settings(&self) -> &SteadyStateSettings {
        &self.settings
    }

    pub fn generator(&self, laser: Laser) -> &Generator {
        match laser {
            Laser::On => &self.laser_on,
            Laser::Off => &self.laser_off,
        }
    }

    /// Maps any state onto the ground populations it reaches after an
    /// infinitely long dark wait. Columns 1 and 2 are the identity; column
    /// j ≥ 3 holds the branching probabilities of level j into the ground
    /// levels. Falls back to plain ground truncation when some non-ground
    /// level cannot decay (e.g. all singlet decay rates set to zero).
    pub fn ground_projection(&self) -> &Matrix2x6<f64> {
        &self.ground_projection
    }

    /// Ground-only state reached by waiting in the dark forever.
    pub fn relax_to_ground(&self, p: &StateVector) -> Result<StateVector> {
        let pv = p.populations();
        let e = |r: usize| {
            (0..LEVELS)
                .map(|j| self.ground_projection[(r, j)] * pv[j])
                .sum::<f64>()
        };
        let (p1, p2) = (e(0), e(1));
        let total = p1 + p2;
        StateVector::new([p1 / total, p2 / total, 0.0, 0.0, 0.0, 0.0])
    }

    pub fn loop_propagator(&self, t_s: f64, t_w: f64) -> Result<LoopPropagator> {
        check_pulse_width(t_s)?;
        check_wait(t_w)?;
        let pulse = segment_propagator(&self.laser_on, t_s)?;
        let wait = segment_propagator(&self.laser_off, t_w)?;
        Ok(LoopPropagator::new(
            wait.map() * pulse.map(),
            t_s,
            t_w,
            self.ground_projection,
        ))
    }

    pub fn run_schedule(
        &self,
        schedule: &PulseSchedule,
        p0: &StateVector,
        track_loops: bool,
    ) -> Result<SimulationResult> {
        let weights = [
            Accumulator::singlet_dwell().weights,
            Accumulator::fluorescence(&self.rates).weights,
        ];
        let mut accs = weights.map(Accumulator::new);
        let mut cache: HashMap<(Laser, u64), AugmentedPropagator> = HashMap::new();

        let train = schedule.train();
        let lp = match (train, track_loops) {
            (Some(t), true) => Some(self.loop_propagator(t.t_s, t.t_w)?),
            _ => None,
        };
        let mut per_loop = lp.as_ref().map(|_| Vec::new());
        let mut converged_at = None;

        let mut state = *p0;
        let mut loop_start = state;
        for (i, seg) in schedule.segments().iter().enumerate() {
            let key = (seg.laser, seg.duration.to_bits());
            let prop = match cache.get(&key) {
                Some(p) => p,
                None => {
                    let p = AugmentedPropagator::new(self.generator(seg.laser), seg.duration, &weights)?;
                    cache.entry(key).or_insert(p)
                }
            };
            state = prop.apply(&state, &mut accs)?;

            if train.is_some() && i % 2 == 1 {
                let loop_index = i / 2 + 1;
                if let (Some(lp), Some(records)) = (&lp, per_loop.as_mut()) {
                    let (p21, p12) = loop_transfer(&loop_start, lp);
                    records.push(LoopRecord {
                        loop_index,
                        polarization: state.polarization(),
                        p21,
                        p12,
                    });
                }
                if converged_at.is_none() && state.max_abs_diff(&loop_start) < self.settings.tol {
                    converged_at = Some(loop_index);
                }
                loop_start = state;
            }
        }

        Ok(SimulationResult {
            final_state: state,
            polarization: state.polarization(),
            singlet_dwell: accs[0].value,
            photon_integral: accs[1].value,
            per_loop,
            converged_at,
        })
    }

    /// Fixed point of the loop map by repeated application from the thermal
    /// state. Returns the state and the number of loops applied.
    pub fn steady_state_iterative(
        &self,
        t_s: f64,
        t_w: f64,
        tol: f64,
        n_max: usize,
    ) -> Result<(StateVector, usize)> {
        SteadyStateSettings { tol, n_max }.validate()?;
        let lp = self.loop_propagator(t_s, t_w)?;
        let mut p = thermal_state();
        let mut change = f64::INFINITY;
        for n in 1..=n_max {
            let next = lp.apply(&p)?;
            change = next.max_abs_diff(&p);
            p = next;
            if change < tol {
                return Ok((p, n));
            }
        }
        Err(Error::NoConvergence {
            loops: n_max,
            last_change: change,
        })
    }

    /// [`steady_state_iterative`](Self::steady_state_iterative) with the
    /// model's own settings.
    pub fn steady_state(&self, t_s: f64, t_w: f64) -> Result<(StateVector, usize)> {
        self.steady_state_iterative(t_s, t_w, self.settings.tol, self.settings.n_max)
    }

    /// Fixed point of the loop map from one linear solve: `(T - I)·P = 0`
    /// with the last equation replaced by `ΣP = 1`.
    pub fn steady_state_eigen(&self, t_s: f64, t_w: f64) -> Result<StateVector> {
        let lp = self.loop_propagator(t_s, t_w)?;
        fixed_point(lp.map())
    }
}

/// Unique stationary distribution of a column-stochastic map.
pub fn fixed_point(t: &Matrix6<f64>) -> Result<StateVector> {
    let mut a = t - Matrix6::identity();

    // Columns of T - I sum to zero, so rank ≤ 5; a second vanishing
    // singular value means more than one stationary state.
    let sv = a.singular_values();
    let mut sorted: Vec<f64> = sv.iter().copied().collect();
    sorted.sort_by(|x, y| x.total_cmp(y));
    if sorted[1] <= 1e-12 * sorted[LEVELS - 1].max(1.0) {
        return Err(Error::DegenerateFixedPoint);
    }

    for j in 0..LEVELS {
        a[(LEVELS - 1, j)] = 1.0;
    }
    let mut rhs = nalgebra::Vector6::zeros();
    rhs[LEVELS - 1] = 1.0;
    let x = a.lu().solve(&rhs).ok_or(Error::DegenerateFixedPoint)?;

    let mut out = [0.0; LEVELS];
    for (i, &v) in x.iter().enumerate() {
        out[i] = if v >= 0.0 {
            v
        } else if v > -CLAMP_TOL {
            0.0
        } else {
            return Err(Error::InvariantViolation {
                level: i + 1,
                value: v,
            });
        };
    }
    StateVector::new(out)
}

/// Absorption probabilities of the dark generator into the ground levels.
fn dark_limit(laser_off: &Generator) -> Matrix2x6<f64> {
    let m = laser_off.matrix();
    let mut proj = Matrix2x6::zeros();
    proj[(0, 0)] = 1.0;
    proj[(1, 1)] = 1.0;

    let transient: Matrix4<f64> = m.fixed_view::<4, 4>(2, 2).into_owned();
    let into_ground = m.fixed_view::<2, 4>(0, 2).into_owned();
    if let Some(inv) = transient.try_inverse() {
        let absorb = -into_ground * inv;
        if absorb.iter().all(|x| x.is_finite()) {
            proj.fixed_view_mut::<2, 4>(0, 2).copy_from(&absorb);
        }
    }
    proj
}
