//! The six-level N-V optical pumping model.
//!
//! Levels (1-based in the physics, 0-based in code):
//!
//! | code | level | meaning                         |
//! |------|-------|---------------------------------|
//! | 0    | 1     | ground triplet, m_s = 0         |
//! | 1    | 2     | ground triplet, m_s = ±1 lumped |
//! | 2    | 3     | excited triplet, m_s = 0        |
//! | 3    | 4     | excited triplet, m_s = ±1       |
//! | 4    | 5     | upper singlet                   |
//! | 5    | 6     | lower (metastable) singlet      |
//!
//! Times are in ns and rates in ns⁻¹ everywhere, so a rate quoted in GHz
//! is used as-is.

use nalgebra::Matrix6;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LEVELS: usize = 6;

/// Ground-state zero-field splitting in GHz. Documentation only: level
/// splittings do not enter the rate model.
pub const D_GS_GHZ: f64 = 2.87;
/// Excited-state zero-field splitting in GHz. Documentation only.
pub const D_ES_GHZ: f64 = 1.41;

/// Tolerance on `[0, 1]` bounds and on the unit sum of a [`StateVector`].
pub const STATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    GroundZero = 0,
    GroundPlusMinus = 1,
    ExcitedZero = 2,
    ExcitedPlusMinus = 3,
    UpperSinglet = 4,
    LowerSinglet = 5,
}

impl Level {
    pub const fn index(self) -> usize {
        self as usize
    }
}

/// Transition rates `kij` from level i to level j, in ns⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    pub k13: f64,
    pub k24: f64,
    pub k31: f64,
    pub k42: f64,
    pub k32: f64,
    pub k41: f64,
    pub k35: f64,
    pub k45: f64,
    pub k56: f64,
    pub k61: f64,
    pub k62: f64,
}

impl RateConstants {
    /// Room-temperature rates used as the compiled-in defaults.
    #[allow(clippy::approx_constant)] // k56 is a measured rate, not 2π.
    pub const TABLE: RateConstants = RateConstants {
        k13: 0.628,
        k24: 0.628,
        k31: 0.4396,
        k42: 0.4396,
        k32: 0.0,
        k41: 0.0,
        k35: 0.0314,
        k45: 0.1884,
        k56: 6.28,
        k61: 0.020724,
        k62: 0.013816,
    };

    pub const ZERO: RateConstants = RateConstants {
        k13: 0.0,
        k24: 0.0,
        k31: 0.0,
        k42: 0.0,
        k32: 0.0,
        k41: 0.0,
        k35: 0.0,
        k45: 0.0,
        k56: 0.0,
        k61: 0.0,
        k62: 0.0,
    };

    /// Every rate paired with its field name, in declaration order.
    pub fn named(&self) -> [(&'static str, f64); 11] {
        [
            ("k13", self.k13),
            ("k24", self.k24),
            ("k31", self.k31),
            ("k42", self.k42),
            ("k32", self.k32),
            ("k41", self.k41),
            ("k35", self.k35),
            ("k45", self.k45),
            ("k56", self.k56),
            ("k61", self.k61),
            ("k62", self.k62),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.named() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidRate { name, value });
            }
        }
        Ok(())
    }
}

impl Default for RateConstants {
    fn default() -> Self {
        Self::TABLE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Laser {
    On,
    Off,
}

impl Laser {
    pub fn is_on(self) -> bool {
        matches!(self, Laser::On)
    }
}

/// Six level populations, each in `[0, 1]` and summing to one (both within
/// [`STATE_TOL`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 6]", into = "[f64; 6]")]
pub struct StateVector([f64; LEVELS]);

impl StateVector {
    pub fn new(p: [f64; LEVELS]) -> Result<Self> {
        for (i, &x) in p.iter().enumerate() {
            if !x.is_finite() || !(-STATE_TOL..=1.0 + STATE_TOL).contains(&x) {
                return Err(Error::InvalidState(format!("P{} = {x} is outside [0, 1]", i + 1)));
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() >= STATE_TOL {
            return Err(Error::InvalidState(format!("populations sum to {sum}, not 1")));
        }
        Ok(StateVector(p))
    }

    /// All population in one level.
    pub fn pure(level: Level) -> Self {
        let mut p = [0.0; LEVELS];
        p[level.index()] = 1.0;
        StateVector(p)
    }

    /// A ground-only state with `P1 = p1` and `P2 = 1 - p1`.
    pub fn ground(p1: f64) -> Result<Self> {
        Self::new([p1, 1.0 - p1, 0.0, 0.0, 0.0, 0.0])
    }

    pub fn populations(&self) -> &[f64; LEVELS] {
        &self.0
    }

    pub fn get(&self, level: Level) -> f64 {
        self.0[level.index()]
    }

    /// Population of the ground m_s = 0 level.
    pub fn polarization(&self) -> f64 {
        self.0[0]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Population outside the two ground levels.
    pub fn non_ground(&self) -> f64 {
        self.0[2..].iter().sum()
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<[f64; LEVELS]> for StateVector {
    type Error = Error;

    fn try_from(p: [f64; LEVELS]) -> Result<Self> {
        StateVector::new(p)
    }
}

impl From<StateVector> for [f64; LEVELS] {
    fn from(s: StateVector) -> Self {
        s.0
    }
}

/// Thermal equilibrium: m_s = ±1 carries twice the weight of m_s = 0.
pub fn thermal_state() -> StateVector {
    StateVector([1.0 / 3.0, 2.0 / 3.0, 0.0, 0.0, 0.0, 0.0])
}

/// Rate matrix `M` of `dP/dt = M·P`. Entry `(i, j)` is the rate from level
/// `j` into level `i`; every column sums to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    matrix: Matrix6<f64>,
    laser: Laser,
}

impl Generator {
    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.matrix
    }

    pub fn laser(&self) -> Laser {
        self.laser
    }
}

/// Builds the laser-on (`M0`) or laser-off (`M1`) rate matrix.
///
/// Diagonal entries are recomputed as the negated sum of the off-diagonal
/// column so that conservation is exact in floating point.
pub fn build_generator(rates: &RateConstants, laser: Laser) -> Result<Generator> {
    rates.validate()?;
    let mut m = Matrix6::zeros();
    let mut set = |from: Level, to: Level, k: f64| m[(to.index(), from.index())] = k;

    use Level::*;
    if laser.is_on() {
        set(GroundZero, ExcitedZero, rates.k13);
        set(GroundPlusMinus, ExcitedPlusMinus, rates.k24);
    }
    set(ExcitedZero, GroundZero, rates.k31);
    set(ExcitedZero, GroundPlusMinus, rates.k32);
    set(ExcitedZero, UpperSinglet, rates.k35);
    set(ExcitedPlusMinus, GroundZero, rates.k41);
    set(ExcitedPlusMinus, GroundPlusMinus, rates.k42);
    set(ExcitedPlusMinus, UpperSinglet, rates.k45);
    set(UpperSinglet, LowerSinglet, rates.k56);
    set(LowerSinglet, GroundZero, rates.k61);
    set(LowerSinglet, GroundPlusMinus, rates.k62);

    for j in 0..LEVELS {
        let out: f64 = (0..LEVELS).filter(|&i| i != j).map(|i| m[(i, j)]).sum();
        m[(j, j)] = -out;
    }
    Ok(Generator { matrix: m, laser })
}
