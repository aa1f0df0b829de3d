//! Rate-equation simulator for optical pumping of the N-V center electron
//! spin, built around exact matrix-exponential propagation of a six-level
//! model under piecewise-constant laser illumination.
//!
//! The main entry point is [`PumpModel`], which holds the rate constants and
//! the laser-on/off generators and exposes loop maps, fixed points, schedule
//! runs and readout observables. Parameter studies live in [`sweep`].

pub mod error;
pub mod expm;
pub mod model;
pub mod observables;
pub mod propagator;
pub mod sequence;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{
    build_generator, thermal_state, Generator, Laser, Level, RateConstants, StateVector, LEVELS,
};
pub use observables::{fluorescence_rate, polarization, rabi_signal, RabiCurve, RabiPoint, ReadoutConfig};
pub use propagator::{
    propagate, propagate_with_accumulators, sample_trajectory, segment_propagator, Accumulator,
    AugmentedPropagator, SegmentPropagator,
};
pub use sequence::{
    fixed_point, loop_transfer, make_pulse_train, LoopPropagator, LoopRecord, PulseSchedule, PumpModel,
    Segment, SimulationResult, SteadyStateSettings, TrainParams,
};
pub use sweep::{
    dwell_vs_polarization, linear_fit, optimize_schedule, power_scale, sweep, DwellPoint, FixedParams,
    LinearFit, Optimum, SweepResult, SweepRow, SweepSpec, SweepVariable, ENGINE_VERSION, OPTIMIZER_GRID,
};
