//! Exact propagation under a constant generator.
//!
//! A segment of duration `dt` is the linear map `exp(M·dt)`. Time integrals
//! of linear functionals `w·P(t)` are obtained without quadrature by
//! appending one row per functional to the generator:
//!
//! ```text
//! d/dt [P]   [M 0] [P]
//!      [J] = [W 0] [J]
//! ```
//!
//! The lower-left block of the exponential of that matrix maps the initial
//! state onto the exact integrals.

use nalgebra::{DMatrix, Matrix6, Vector6};

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::model::{Generator, Laser, RateConstants, StateVector, LEVELS};

/// Negative populations above `-CLAMP_TOL` are round-off and clamped to 0.
pub const CLAMP_TOL: f64 = 1e-12;

fn check_duration(dt: f64) -> Result<()> {
    if dt.is_finite() && dt >= 0.0 {
        Ok(())
    } else {
        Err(Error::BadParameter {
            what: "duration",
            constraint: "finite and ≥ 0 ns",
            value: dt,
        })
    }
}

/// Applies `m` to `p`, clamping round-off negatives.
pub(crate) fn apply_map(m: &Matrix6<f64>, p: &StateVector) -> Result<StateVector> {
    let q = m * Vector6::from_column_slice(p.populations());
    let mut out = [0.0; LEVELS];
    for (i, &x) in q.iter().enumerate() {
        out[i] = if x >= 0.0 {
            x
        } else if x > -CLAMP_TOL {
            0.0
        } else {
            return Err(Error::InvariantViolation {
                level: i + 1,
                value: x,
            });
        };
    }
    StateVector::new(out)
}

/// `exp(M·dt)` for one constant-laser segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPropagator {
    map: Matrix6<f64>,
    duration: f64,
    laser: Laser,
}

impl SegmentPropagator {
    pub fn map(&self) -> &Matrix6<f64> {
        &self.map
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn laser(&self) -> Laser {
        self.laser
    }

    pub fn apply(&self, p: &StateVector) -> Result<StateVector> {
        apply_map(&self.map, p)
    }
}

pub fn segment_propagator(g: &Generator, dt: f64) -> Result<SegmentPropagator> {
    check_duration(dt)?;
    let a = DMatrix::from_iterator(LEVELS, LEVELS, g.matrix().iter().map(|x| x * dt));
    let e = expm(&a)?;
    Ok(SegmentPropagator {
        map: Matrix6::from_iterator(e.iter().copied()),
        duration: dt,
        laser: g.laser(),
    })
}

pub fn propagate(g: &Generator, p: &StateVector, dt: f64) -> Result<StateVector> {
    segment_propagator(g, dt)?.apply(p)
}

/// Running value of `∫ w·P(t) dt`, in ns (times whatever unit `w` carries).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accumulator {
    pub weights: [f64; LEVELS],
    pub value: f64,
}

impl Accumulator {
    pub fn new(weights: [f64; LEVELS]) -> Self {
        Accumulator { weights, value: 0.0 }
    }

    /// Time spent in the two singlet levels.
    pub fn singlet_dwell() -> Self {
        Self::new([0.0, 0.0, 0.0, 0.0, 1.0, 1.0])
    }

    /// Integrated radiative decay rate, i.e. emitted photons per N-V.
    pub fn fluorescence(rates: &RateConstants) -> Self {
        Self::new([0.0, 0.0, rates.k31, rates.k42, 0.0, 0.0])
    }
}

/// Exponential of a generator augmented with accumulator rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPropagator {
    map: Matrix6<f64>,
    /// Row `i` maps the segment's start state onto the integral gained by
    /// accumulator `i`.
    integrals: DMatrix<f64>,
    duration: f64,
}

impl AugmentedPropagator {
    pub fn new(g: &Generator, dt: f64, weights: &[[f64; LEVELS]]) -> Result<Self> {
        check_duration(dt)?;
        let n = weights.len();
        let dim = LEVELS + n;
        let mut a = DMatrix::zeros(dim, dim);
        for j in 0..LEVELS {
            for i in 0..LEVELS {
                a[(i, j)] = g.matrix()[(i, j)] * dt;
            }
            for (r, w) in weights.iter().enumerate() {
                a[(LEVELS + r, j)] = w[j] * dt;
            }
        }
        let e = expm(&a)?;
        Ok(AugmentedPropagator {
            map: Matrix6::from_fn(|i, j| e[(i, j)]),
            integrals: e.view((LEVELS, 0), (n, LEVELS)).into_owned(),
            duration: dt,
        })
    }

    pub fn map(&self) -> &Matrix6<f64> {
        &self.map
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Linear functional giving accumulator `r`'s gain from a start state.
    pub fn integral_row(&self, r: usize) -> [f64; LEVELS] {
        std::array::from_fn(|j| self.integrals[(r, j)])
    }

    /// Advances `p` and adds each segment integral to the matching
    /// accumulator. `accs` must line up with the weights this was built with.
    pub fn apply(&self, p: &StateVector, accs: &mut [Accumulator]) -> Result<StateVector> {
        assert_eq!(accs.len(), self.integrals.nrows(), "accumulator count mismatch");
        let pv = p.populations();
        for (r, acc) in accs.iter_mut().enumerate() {
            let gained: f64 = (0..LEVELS).map(|j| self.integrals[(r, j)] * pv[j]).sum();
            acc.value += gained;
        }
        apply_map(&self.map, p)
    }
}

pub fn propagate_with_accumulators(
    g: &Generator,
    p: &StateVector,
    dt: f64,
    accs: &mut [Accumulator],
) -> Result<StateVector> {
    let weights: Vec<_> = accs.iter().map(|a| a.weights).collect();
    AugmentedPropagator::new(g, dt, &weights)?.apply(p, accs)
}

/// States at `0, Δ, 2Δ, …` and always at `dt` itself.
pub fn sample_trajectory(
    g: &Generator,
    p: &StateVector,
    dt: f64,
    sample_dt: f64,
) -> Result<Vec<(f64, StateVector)>> {
    check_duration(dt)?;
    if !(sample_dt > 0.0 && sample_dt.is_finite()) {
        return Err(Error::BadParameter {
            what: "sample step",
            constraint: "> 0 ns",
            value: sample_dt,
        });
    }
    // Steps landing within this slack of `dt` are treated as ending on it.
    let slack = 1e-9 * sample_dt;
    let full = ((dt + slack) / sample_dt).floor() as usize;
    let step = segment_propagator(g, sample_dt)?;

    let mut out = Vec::with_capacity(full + 2);
    let mut state = *p;
    out.push((0.0, state));
    for k in 1..=full {
        state = step.apply(&state)?;
        let t = if k == full && (dt - k as f64 * sample_dt).abs() <= slack {
            dt
        } else {
            k as f64 * sample_dt
        };
        out.push((t, state));
    }
    let last_t = out.last().map(|s| s.0).unwrap_or(0.0);
    if last_t < dt {
        state = propagate(g, &state, dt - last_t)?;
        out.push((dt, state));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_generator, thermal_state, Level};

    fn m0() -> Generator {
        build_generator(&RateConstants::TABLE, Laser::On).unwrap()
    }

    fn m1() -> Generator {
        build_generator(&RateConstants::TABLE, Laser::Off).unwrap()
    }

    #[test]
    fn zero_duration_is_identity() {
        for g in [m0(), m1()] {
            assert_eq!(*segment_propagator(&g, 0.0).unwrap().map(), Matrix6::identity());
        }
        assert_eq!(propagate(&m0(), &thermal_state(), 0.0).unwrap(), thermal_state());
    }

    #[test]
    fn ground_states_are_dark_fixed_points() {
        let p = StateVector::ground(0.3).unwrap();
        let q = propagate(&m1(), &p, 1000.0).unwrap();
        assert!(q.max_abs_diff(&p) < 1e-15);
    }

    #[test]
    fn columns_stay_stochastic() {
        for dt in [0.5, 4.0, 150.0, 1000.0] {
            for g in [m0(), m1()] {
                let t = segment_propagator(&g, dt).unwrap();
                for j in 0..LEVELS {
                    let s: f64 = t.map().column(j).sum();
                    assert!((s - 1.0).abs() < 1e-10, "dt {dt}: column {j} sums to {s}");
                }
                assert!(t.map().iter().all(|x| (-CLAMP_TOL..=1.0 + 1e-10).contains(x)));
            }
        }
    }

    #[test]
    fn singlet_cascade_splits_by_branching_ratio() {
        let p = StateVector::pure(Level::UpperSinglet);
        let q = propagate(&m1(), &p, 5000.0).unwrap();
        assert!(q.non_ground() < 1e-12);
        let ratio = q.get(Level::GroundZero) / q.get(Level::GroundPlusMinus);
        assert!((ratio - 0.020724 / 0.013816).abs() < 1e-9);
        assert!((ratio - 1.5).abs() < 1e-9);
    }

    #[test]
    fn accumulators_untouched_by_zero_duration() {
        let mut accs = [Accumulator::singlet_dwell(), Accumulator::new([1.0; 6])];
        accs[1].value = 2.5;
        propagate_with_accumulators(&m0(), &thermal_state(), 0.0, &mut accs).unwrap();
        assert_eq!(accs[0].value, 0.0);
        assert_eq!(accs[1].value, 2.5);
    }

    #[test]
    fn no_singlet_dwell_in_dark_ground_state() {
        let mut accs = [Accumulator::singlet_dwell()];
        let p = StateVector::pure(Level::GroundZero);
        propagate_with_accumulators(&m1(), &p, 100.0, &mut accs).unwrap();
        assert_eq!(accs[0].value, 0.0);
    }

    #[test]
    fn unit_weight_integrates_elapsed_time() {
        let mut accs = [Accumulator::new([1.0; 6])];
        propagate_with_accumulators(&m0(), &thermal_state(), 37.5, &mut accs).unwrap();
        assert!((accs[0].value - 37.5).abs() < 1e-11);
    }

    #[test]
    fn sample_grid_includes_endpoint() {
        let s = sample_trajectory(&m0(), &thermal_state(), 10.0, 5.0).unwrap();
        let times: Vec<f64> = s.iter().map(|x| x.0).collect();
        assert_eq!(times, vec![0.0, 5.0, 10.0]);

        let s = sample_trajectory(&m0(), &thermal_state(), 10.0, 3.0).unwrap();
        let times: Vec<f64> = s.iter().map(|x| x.0).collect();
        assert_eq!(times, vec![0.0, 3.0, 6.0, 9.0, 10.0]);

        let s = sample_trajectory(&m0(), &thermal_state(), 1.0, 0.1).unwrap();
        assert_eq!(s.len(), 11);
        assert_eq!(s.last().unwrap().0, 1.0);
    }

    #[test]
    fn bad_sample_step() {
        for bad in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                sample_trajectory(&m0(), &thermal_state(), 10.0, bad),
                Err(Error::BadParameter { .. })
            ));
        }
        assert!(propagate(&m0(), &thermal_state(), -1.0).is_err());
    }

    #[test]
    fn samples_obey_semigroup() {
        let s = sample_trajectory(&m0(), &thermal_state(), 60.0, 2.5).unwrap();
        let step = segment_propagator(&m0(), 2.5).unwrap();
        for w in s.windows(2) {
            let next = step.apply(&w[0].1).unwrap();
            assert!(next.max_abs_diff(&w[1].1) < 1e-10);
        }
    }
}
