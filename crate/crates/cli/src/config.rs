//! JSON run configuration.
//!
//! ```json
//! {
//!   "rates":      { "k13": 0.628, ... },
//!   "tolerances": { "steady_tol": 1e-10, "n_max": 10000, "expm_accuracy": 1e-14 },
//!   "fixed":      { "t_s": 4, "t_w": 150, "n": 400, "t_read": 300, "power_scale": 1 },
//!   "output":     { "format": "csv", "path": "out.csv" }
//! }
//! ```
//!
//! Every section and key is optional; unknown keys are rejected.

use std::path::PathBuf;

use nvpump_core::{power_scale, FixedParams, PumpModel, RateConstants, ReadoutConfig, SteadyStateSettings};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Smallest accepted `expm_accuracy`. The Padé engine works at double
/// precision and cannot promise anything tighter.
pub const EXPM_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Per-rate overrides on top of the compiled-in table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RateOverrides {
    k13: Option<f64>,
    k24: Option<f64>,
    k31: Option<f64>,
    k42: Option<f64>,
    k32: Option<f64>,
    k41: Option<f64>,
    k35: Option<f64>,
    k45: Option<f64>,
    k56: Option<f64>,
    k61: Option<f64>,
    k62: Option<f64>,
}

impl RateOverrides {
    fn apply(self, base: RateConstants) -> RateConstants {
        RateConstants {
            k13: self.k13.unwrap_or(base.k13),
            k24: self.k24.unwrap_or(base.k24),
            k31: self.k31.unwrap_or(base.k31),
            k42: self.k42.unwrap_or(base.k42),
            k32: self.k32.unwrap_or(base.k32),
            k41: self.k41.unwrap_or(base.k41),
            k35: self.k35.unwrap_or(base.k35),
            k45: self.k45.unwrap_or(base.k45),
            k56: self.k56.unwrap_or(base.k56),
            k61: self.k61.unwrap_or(base.k61),
            k62: self.k62.unwrap_or(base.k62),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    #[serde(alias = "tol")]
    pub steady_tol: f64,
    pub n_max: usize,
    pub expm_accuracy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let s = SteadyStateSettings::default();
        Tolerances {
            steady_tol: s.tol,
            n_max: s.n_max,
            expm_accuracy: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fixed {
    pub t_s: f64,
    pub t_w: f64,
    #[serde(alias = "N")]
    pub n: usize,
    pub t_read: f64,
    pub power_scale: f64,
}

impl Default for Fixed {
    fn default() -> Self {
        let f = FixedParams::default();
        Fixed {
            t_s: f.t_s,
            t_w: f.t_w,
            n: f.n,
            t_read: ReadoutConfig::default().t_read,
            power_scale: f.power_scale,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub format: Format,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    rates: RateOverrides,
    tolerances: Tolerances,
    fixed: Fixed,
    output: OutputConfig,
}

/// Fully validated settings for one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub rates: RateConstants,
    pub tolerances: Tolerances,
    pub fixed: Fixed,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            rates: RateConstants::TABLE,
            tolerances: Tolerances::default(),
            fixed: Fixed::default(),
            output: OutputConfig::default(),
        }
    }
}

pub fn parse_config(text: &[u8]) -> Result<RunConfig, CliError> {
    let text = std::str::from_utf8(text).map_err(|e| CliError::config(format!("not UTF-8: {e}")))?;
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
    let cfg = RunConfig {
        rates: raw.rates.apply(RateConstants::TABLE),
        tolerances: raw.tolerances,
        fixed: raw.fixed,
        output: raw.output,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Checks everything downstream types will insist on, so bad input fails
    /// before any computation starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: nvpump_core::Error| CliError::config(e.to_string());
        self.rates.validate().map_err(cfg)?;
        self.settings().validate().map_err(cfg)?;
        let acc = self.tolerances.expm_accuracy;
        if !(acc.is_finite() && acc >= EXPM_FLOOR) {
            return Err(CliError::config(format!(
                "expm_accuracy must be ≥ {EXPM_FLOOR:e} (got {acc})"
            )));
        }
        self.fixed_params().validate().map_err(cfg)?;
        self.readout().validate().map_err(cfg)?;
        Ok(())
    }

    pub fn settings(&self) -> SteadyStateSettings {
        SteadyStateSettings {
            tol: self.tolerances.steady_tol,
            n_max: self.tolerances.n_max,
        }
    }

    pub fn fixed_params(&self) -> FixedParams {
        FixedParams {
            t_s: self.fixed.t_s,
            t_w: self.fixed.t_w,
            n: self.fixed.n,
            power_scale: self.fixed.power_scale,
        }
    }

    pub fn readout(&self) -> ReadoutConfig {
        ReadoutConfig {
            t_read: self.fixed.t_read,
            ..ReadoutConfig::default()
        }
    }

    /// Model at the configured rates, without the power scale applied.
    pub fn base_model(&self) -> nvpump_core::Result<PumpModel> {
        PumpModel::new(self.rates)?.with_settings(self.settings())
    }

    /// Model at the configured rates and laser power.
    pub fn model(&self) -> nvpump_core::Result<PumpModel> {
        PumpModel::new(power_scale(&self.rates, self.fixed.power_scale)?)?.with_settings(self.settings())
    }
}
