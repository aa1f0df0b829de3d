//! Shared fixtures for the engine benchmarks in `benches/`.

use nvpump_core::{thermal_state, Laser, PumpModel, RateConstants, StateVector, SweepSpec, SweepVariable};

pub fn table_model() -> PumpModel {
    PumpModel::new(RateConstants::TABLE).expect("table rates are valid")
}

/// `dt·M0` for the laser-on generator, as a dynamic matrix.
pub fn scaled_generator(dt: f64) -> nalgebra::DMatrix<f64> {
    let m = table_model();
    let g = m.generator(Laser::On).matrix();
    nalgebra::DMatrix::from_iterator(6, 6, g.iter().map(|x| x * dt))
}

/// The pulse-width grid of the pulse-width figure.
pub fn pulse_width_sweep() -> SweepSpec {
    SweepSpec::new(
        SweepVariable::PulseWidth,
        vec![4.0, 10.0, 20.0, 50.0, 100.0, 200.0],
    )
}

pub fn start_state() -> StateVector {
    thermal_state()
}
