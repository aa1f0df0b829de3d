//! Experiment-facing quantities: polarization, fluorescence, readout
//! counts and Rabi contrast.
//!
//! The microwave drive is an incoherent population rotation between the two
//! ground levels. Readout counts are the fluorescence integral during a
//! laser pulse of width `t_read`, which is linear in the pre-readout state.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Laser, RateConstants, StateVector, LEVELS};
use crate::propagator::{Accumulator, AugmentedPropagator};
use crate::sequence::PumpModel;

pub const DEFAULT_T_READ: f64 = 300.0;
pub const DEFAULT_RABI_POINTS: usize = 64;

/// Largest non-ground population a state may carry before a microwave
/// rotation is refused.
pub const GROUND_ONLY_TOL: f64 = 1e-6;

/// Relative cosine-fit residual above which the model is inconsistent.
pub const FIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutConfig {
    /// ns
    pub t_read: f64,
    pub collection_eff: f64,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        ReadoutConfig {
            t_read: DEFAULT_T_READ,
            collection_eff: 1.0,
        }
    }
}

impl ReadoutConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_read.is_finite() && self.t_read > 0.0) {
            return Err(Error::BadParameter {
                what: "t_read",
                constraint: "> 0 ns",
                value: self.t_read,
            });
        }
        if !(self.collection_eff > 0.0 && self.collection_eff <= 1.0) {
            return Err(Error::BadParameter {
                what: "collection_eff",
                constraint: "in (0, 1]",
                value: self.collection_eff,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiPoint {
    pub theta: f64,
    pub counts: f64,
}

/// Readout counts over a microwave rotation sweep, with the fitted
/// `I(θ) = offset + amplitude·cos θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiCurve {
    pub points: Vec<RabiPoint>,
    pub offset: f64,
    pub amplitude: f64,
    pub i_max: f64,
    pub i_min: f64,
    /// `(i_max - i_min) / i_max`
    pub contrast: f64,
    /// Euclidean norm of fit residuals.
    pub residual: f64,
}

pub fn polarization(p: &StateVector) -> f64 {
    p.polarization()
}

/// Instantaneous photon emission rate, ns⁻¹.
pub fn fluorescence_rate(p: &StateVector, rates: &RateConstants) -> f64 {
    let pv = p.populations();
    rates.k31 * pv[2] + rates.k42 * pv[3]
}

/// Population swap between the two ground levels by a pulse of area
/// `theta`. Excited and singlet levels are untouched.
pub fn rabi_signal(p: &StateVector, theta: f64) -> Result<StateVector> {
    let stray = p.non_ground();
    if stray > GROUND_ONLY_TOL {
        return Err(Error::UnsupportedState { population: stray });
    }
    let half = 0.5 * theta;
    let (stay, swap) = (half.cos().powi(2), half.sin().powi(2));
    let mut out = *p.populations();
    let ground = out[0] + out[1];
    out[0] = p.populations()[0] * stay + p.populations()[1] * swap;
    out[1] = ground - out[0];
    StateVector::new(out)
}

impl PumpModel {
    /// Row vector `r` with `counts(p) = r·p` for a readout pulse.
    pub fn readout_functional(&self, cfg: &ReadoutConfig) -> Result<[f64; LEVELS]> {
        cfg.validate()?;
        let weights = [Accumulator::fluorescence(self.rates()).weights];
        let prop = AugmentedPropagator::new(self.generator(Laser::On), cfg.t_read, &weights)?;
        Ok(prop.integral_row(0).map(|x| x * cfg.collection_eff))
    }

    /// Detected photons during a readout pulse starting from `p0`.
    pub fn readout_counts(&self, p0: &StateVector, cfg: &ReadoutConfig) -> Result<f64> {
        let r = self.readout_functional(cfg)?;
        Ok(dot(&r, p0.populations()).max(0.0))
    }

    pub fn rabi_contrast(&self, p_polarized: &StateVector, cfg: &ReadoutConfig) -> Result<RabiCurve> {
        self.rabi_contrast_with(p_polarized, cfg, DEFAULT_RABI_POINTS)
    }

    /// Sweeps `θ` over `[0, 2π]` in `points` evenly spaced steps (both ends
    /// included) and fits a cosine to the readout counts.
    pub fn rabi_contrast_with(
        &self,
        p_polarized: &StateVector,
        cfg: &ReadoutConfig,
        points: usize,
    ) -> Result<RabiCurve> {
        if points < 32 {
            return Err(Error::BadParameter {
                what: "Rabi points",
                constraint: "≥ 32",
                value: points as f64,
            });
        }
        let r = self.readout_functional(cfg)?;
        let mut curve = Vec::with_capacity(points);
        for i in 0..points {
            let theta = TAU * i as f64 / (points - 1) as f64;
            let rotated = rabi_signal(p_polarized, theta)?;
            curve.push(RabiPoint {
                theta,
                counts: dot(&r, rotated.populations()).max(0.0),
            });
        }
        fit_cosine(curve)
    }
}

fn dot(a: &[f64; LEVELS], b: &[f64; LEVELS]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Least-squares `I(θ) = A + B·cos θ`.
fn fit_cosine(points: Vec<RabiPoint>) -> Result<RabiCurve> {
    let n = points.len() as f64;
    let (mut sc, mut scc, mut si, mut sic) = (0.0, 0.0, 0.0, 0.0);
    for p in &points {
        let c = p.theta.cos();
        sc += c;
        scc += c * c;
        si += p.counts;
        sic += p.counts * c;
    }
    let det = n * scc - sc * sc;
    let amplitude = (n * sic - sc * si) / det;
    let offset = (si - amplitude * sc) / n;

    let residual = points
        .iter()
        .map(|p| (p.counts - offset - amplitude * p.theta.cos()).powi(2))
        .sum::<f64>()
        .sqrt();
    let level = points.iter().map(|p| p.counts.abs()).fold(0.0, f64::max);
    if residual > FIT_TOL * level {
        return Err(Error::FitFailure { residual, level });
    }

    let i_max = offset + amplitude.abs();
    let i_min = (offset - amplitude.abs()).max(0.0);
    let contrast = if i_max > 0.0 { (i_max - i_min) / i_max } else { 0.0 };
    Ok(RabiCurve {
        points,
        offset,
        amplitude,
        i_max,
        i_min,
        contrast,
        residual,
    })
}
