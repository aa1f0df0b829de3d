use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{name} must be ≥ 0 and finite (got {value})")]
    InvalidRate { name: &'static str, value: f64 },

    #[error("invalid state vector: {0}")]
    InvalidState(String),

    #[error("{what} must be {constraint} (got {value})")]
    BadParameter {
        what: &'static str,
        constraint: &'static str,
        value: f64,
    },

    #[error("matrix exponential produced a non-finite entry")]
    NonFinite,

    #[error("population {value:e} at level {level} is below the round-off clamp tolerance")]
    InvariantViolation { level: usize, value: f64 },

    #[error("state has population {population:e} outside the ground levels; microwave rotation needs a ground-only state")]
    UnsupportedState { population: f64 },

    #[error("no convergence after {loops} loops (last ∞-norm change {last_change:e})")]
    NoConvergence { loops: usize, last_change: f64 },

    #[error("loop map has a degenerate fixed point (null space dimension > 1)")]
    DegenerateFixedPoint,

    #[error("cosine fit residual {residual:e} exceeds tolerance for signal level {level:e}")]
    FitFailure { residual: f64, level: f64 },

    #[error("at {variable} = {value}: {source}")]
    AtGridPoint {
        variable: &'static str,
        value: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, variable: &'static str, value: f64) -> Self {
        Error::AtGridPoint {
            variable,
            value,
            source: Box::new(self),
        }
    }
}
