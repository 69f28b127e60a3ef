//! Leading-term predictions, power-law fits and the pass/fail verifiers built
//! on top of the certified lattice sums.

mod fit;
mod predict;
mod verify;

pub use fit::{fit_linear, fit_power_law, fit_power_law_ln, fit_power_law_ln_stable, FitReport, LinearFit};
pub use predict::{
    predict_diag_leading, predict_trace_leading, trace_prediction_total, Prediction, Profile, TracePrediction,
};
pub use verify::{
    diag_series, trace_series, verify_correction_order, verify_nonperiod_decay, verify_profile, verify_rapid_decay,
    CorrectionReport, DiagSetup, DECAY_EXPONENT, NonPeriodReport, ProfileDirection, ProfileReport, ProfileRow, RapidDecayReport,
    SeriesPoint,
};

use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_POINTS_PER_DECADE: u32 = 12;

fn default_ppd() -> u32 {
    DEFAULT_POINTS_PER_DECADE
}

/// Logarithmic grid `min * 10^(j / points_per_decade)`, ending exactly at `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaGrid {
    pub min: f64,
    pub max: f64,
    #[serde(default = "default_ppd")]
    pub points_per_decade: u32,
}

impl LambdaGrid {
    pub fn new(min: f64, max: f64, points_per_decade: u32) -> Self {
        Self { min, max, points_per_decade }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min >= 1.0 && self.max >= self.min && self.max.is_finite()) {
            return Err(LabError::InvalidArgument(format!(
                "lambda grid [{}, {}] needs 1 <= min <= max",
                self.min, self.max
            )));
        }
        if self.points_per_decade == 0 {
            return Err(LabError::InvalidArgument("points_per_decade must be positive".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let ppd = self.points_per_decade.max(1) as f64;
        let n = ((self.max / self.min).log10() * ppd).round().max(0.0) as usize;
        let mut out: Vec<f64> = (0..=n).map(|j| self.min * 10f64.powf(j as f64 / ppd)).collect();
        if let Some(last) = out.last_mut() {
            if n > 0 {
                *last = self.max;
            }
        }
        out
    }
}
