//! Pass/fail verifiers: rapid decay off the locus, scaling profiles,
//! correction order and decay at non-periods.

use super::fit::{fit_linear, fit_ln_min, FitReport};
use super::predict::predict_diag_leading;
use crate::error::{LabError, Result};
use crate::geometry::{fixed_locus, meridian_normal_fraction, Pole};
use crate::kernels::{smoothed_projector_diag, trace_ft, Cutoff, SumResult, Tolerance};
use crate::model::{PointM, ToricModel};
use num_complex::Complex64;
use rayon::prelude::*;

/// Fitted exponent a series must beat to count as rapidly decaying.
pub const DECAY_EXPONENT: f64 = -5.0;

#[derive(Debug, Clone, Copy)]
pub struct DiagSetup<'a> {
    pub model: &'a ToricModel,
    pub cutoff: &'a Cutoff,
    pub beta: &'a [f64],
    pub s0: &'a [f64],
    /// Base point on `M_beta`.
    pub point: &'a PointM,
    pub tol: Tolerance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub lambda: f64,
    pub result: SumResult,
}

impl SeriesPoint {
    pub fn value(&self) -> Complex64 {
        self.result.value()
    }

    pub fn ln_abs(&self) -> f64 {
        self.result.ln_abs()
    }
}

fn diag_at(setup: &DiagSetup, point: &PointM, lambdas: &[f64]) -> Result<Vec<SeriesPoint>> {
    lambdas
        .par_iter()
        .map(|&lambda| {
            let result =
                smoothed_projector_diag(setup.model, setup.cutoff, setup.beta, setup.s0, lambda, point, setup.tol)?;
            Ok(SeriesPoint { lambda, result })
        })
        .collect()
}

/// `S(lambda beta, s0, x, x)` at the setup's base point over `lambdas`.
pub fn diag_series(setup: &DiagSetup, lambdas: &[f64]) -> Result<Vec<SeriesPoint>> {
    diag_at(setup, setup.point, lambdas)
}

pub fn trace_series(
    model: &ToricModel,
    cutoff: &Cutoff,
    beta: &[f64],
    s0: &[f64],
    lambdas: &[f64],
    tol: Tolerance,
) -> Result<Vec<SeriesPoint>> {
    lambdas
        .par_iter()
        .map(|&lambda| Ok(SeriesPoint { lambda, result: trace_ft(model, cutoff, beta, s0, lambda, tol)? }))
        .collect()
}

fn ln_samples(series: &[SeriesPoint], resolved_only: bool) -> Vec<(f64, f64)> {
    series
        .iter()
        .filter(|p| !resolved_only || p.result.resolved())
        .map(|p| (p.lambda, p.ln_abs()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RapidDecayReport {
    pub h0: f64,
    pub fixed: Vec<SeriesPoint>,
    pub fixed_fit: FitReport,
    /// Same grid at zero displacement.
    pub control_fit: FitReport,
    /// `(lambda^{2 delta}, ln|S(y_lambda)| - ln|S(x)|)` at displacement `D lambda^{delta - 1/2}`.
    pub scaled: Vec<(f64, f64)>,
    pub scaled_slope: f64,
    pub scaled_r_squared: f64,
    pub pass: bool,
}

/// Checks decay of the diagonal off `M_beta` along the meridian of `factor`:
/// at a fixed arclength `h0` the fitted exponent must be at most -5, and at
/// arclength `D lambda^{delta - 1/2}` the log-ratio must fall linearly in
/// `lambda^{2 delta}`.
pub fn verify_rapid_decay(
    setup: &DiagSetup,
    factor: usize,
    h0: f64,
    scale_d: f64,
    delta: f64,
    lambdas: &[f64],
) -> Result<RapidDecayReport> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(LabError::InvalidArgument(format!("delta {delta} outside (0, 1/2)")));
    }
    if !(scale_d > 0.0) {
        return Err(LabError::InvalidArgument(format!("D = {scale_d} must be positive")));
    }
    if let Some(&l) = lambdas.iter().find(|&&l| h0 < scale_d * l.powf(delta - 0.5)) {
        return Err(LabError::InvalidArgument(format!("h0 = {h0} is below D lambda^(delta - 1/2) at lambda = {l}")));
    }
    let model = setup.model;
    let moved = model.meridian_point(factor, setup.point, h0)?;
    let fixed = diag_at(setup, &moved, lambdas)?;
    let control = diag_series(setup, lambdas)?;
    let fixed_fit = fit_ln_min(&ln_samples(&fixed, true), 6)?;
    let control_fit = fit_ln_min(&ln_samples(&control, true), 6)?;

    let scaled: Vec<(f64, f64)> = lambdas
        .par_iter()
        .zip(&control)
        .map(|(&lambda, base)| {
            let y = model.meridian_point(factor, setup.point, scale_d * lambda.powf(delta - 0.5))?;
            let s = smoothed_projector_diag(model, setup.cutoff, setup.beta, setup.s0, lambda, &y, setup.tol)?;
            Ok((lambda.powf(2.0 * delta), s.ln_abs() - base.ln_abs()))
        })
        .collect::<Result<_>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) = scaled.iter().copied().unzip();
    let line = fit_linear(&x, &y)?;
    let pass = fixed_fit.exponent <= DECAY_EXPONENT && line.slope < 0.0;
    Ok(RapidDecayReport {
        h0,
        fixed,
        fixed_fit,
        control_fit,
        scaled,
        scaled_slope: line.slope,
        scaled_r_squared: line.r_squared,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileDirection {
    /// Meridian of `factor`, normal to `M_beta`.
    Normal { factor: usize },
    /// Meridian of a pole factor of the fixed component, rotated by the return map.
    FixedRotation { factor: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub h: f64,
    pub measured: f64,
    pub predicted: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileReport {
    pub lambda: f64,
    pub rows: Vec<ProfileRow>,
    pub max_rel_error: f64,
    pub pass: bool,
}

/// Compares `|S(y) / S(x)|` at meridian displacement `h / sqrt(lambda)` with
/// the predicted profile, for every `h` in `grid`.
pub fn verify_profile(
    setup: &DiagSetup,
    direction: ProfileDirection,
    grid: &[f64],
    lambda: f64,
    tolerance: f64,
) -> Result<ProfileReport> {
    if let Some(h) = grid.iter().find(|h| !(h.abs() <= 2.0)) {
        return Err(LabError::InvalidArgument(format!("profile displacement {h} exceeds 2")));
    }
    let model = setup.model;
    let base = smoothed_projector_diag(model, setup.cutoff, setup.beta, setup.s0, lambda, setup.point, setup.tol)?;
    let prediction = predict_diag_leading(model, setup.point, setup.s0, setup.beta, setup.cutoff, &[], 0.0, 0)?;

    let (factor, sign, block, fraction) = match direction {
        ProfileDirection::Normal { factor } => (factor, 1.0, None, meridian_normal_fraction(model, setup.point, factor)?),
        ProfileDirection::FixedRotation { factor } => {
            let info = fixed_locus(model, setup.s0)?;
            let component = info
                .components
                .iter()
                .find(|c| c.contains(&setup.point.s))
                .ok_or(LabError::NotAPeriod)?;
            let pole = component.poles.get(factor).copied().flatten().ok_or_else(|| {
                LabError::InvalidArgument(format!("factor {factor} is not a pole factor of the fixed component"))
            })?;
            let block = component.poles[..factor].iter().filter(|p| p.is_some()).count();
            let sign = if pole == Pole::Bottom { 1.0 } else { -1.0 };
            (factor, sign, Some(block), 0.0)
        }
    };
    let width = 2 * prediction.profile.angles.len();
    let rows: Vec<ProfileRow> = grid
        .par_iter()
        .map(|&h| {
            let y = model.meridian_point(factor, setup.point, sign * h / lambda.sqrt())?;
            let s = smoothed_projector_diag(model, setup.cutoff, setup.beta, setup.s0, lambda, &y, setup.tol)?;
            let measured = (s.ln_abs() - base.ln_abs()).exp();
            let predicted = match block {
                None => prediction.profile.eval(&vec![0.0; width], h * h * fraction)?.norm(),
                Some(b) => {
                    let mut w = vec![0.0; width];
                    w[2 * b] = h;
                    prediction.profile.eval(&w, 0.0)?.norm()
                }
            };
            Ok(ProfileRow { h, measured, predicted, rel_error: (measured / predicted - 1.0).abs() })
        })
        .collect::<Result<_>>()?;
    let max_rel_error = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    Ok(ProfileReport { lambda, rows, max_rel_error, pass: max_rel_error <= tolerance })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionReport {
    /// `(lambda, |S / leading - 1|)`.
    pub samples: Vec<(f64, f64)>,
    pub fit: FitReport,
}

/// Fits the relative deviation of the diagonal from its leading term.
pub fn verify_correction_order(setup: &DiagSetup, lambdas: &[f64]) -> Result<CorrectionReport> {
    let prediction = predict_diag_leading(setup.model, setup.point, setup.s0, setup.beta, setup.cutoff, &[], 0.0, 0)?;
    let series = diag_series(setup, lambdas)?;
    let samples: Vec<(f64, f64)> = series
        .iter()
        .map(|p| {
            // compare in the log domain so huge lambdas do not overflow
            let ln_ratio = p.ln_abs() - prediction.magnitude_at(p.lambda).ln();
            (p.lambda, ln_ratio.exp_m1().abs())
        })
        .collect();
    let ln: Vec<(f64, f64)> = samples.iter().map(|&(l, v)| (l, v.ln())).collect();
    let fit = fit_ln_min(&ln, 6)?;
    Ok(CorrectionReport { samples, fit })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonPeriodReport {
    pub samples: Vec<SeriesPoint>,
    /// `|S(lambda beta, 0)|` at the first grid point; scale of the `lambda^-5` envelope.
    pub envelope_anchor: f64,
    /// Whether `|value| + error bound` lies under `anchor (lambda / lambda_min)^-5`.
    pub below_envelope: Vec<bool>,
    /// Fit over the whole grid, including samples at the round-off floor.
    pub literal_fit: Option<FitReport>,
    /// Fit over the samples whose magnitude exceeds their error bound.
    pub resolved_fit: Option<FitReport>,
    pub resolved: usize,
    pub pass: bool,
}

/// Decay of the trace transform at a non-period `s0`.
pub fn verify_nonperiod_decay(
    model: &ToricModel,
    cutoff: &Cutoff,
    beta: &[f64],
    s0: &[f64],
    lambdas: &[f64],
    tol: Tolerance,
) -> Result<NonPeriodReport> {
    if fixed_locus(model, s0)?.is_period() {
        return Err(LabError::IsAPeriod);
    }
    let lambda_min = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    if !lambda_min.is_finite() {
        return Err(LabError::InvalidArgument("empty lambda grid".into()));
    }
    let samples = trace_series(model, cutoff, beta, s0, lambdas, tol)?;
    let zero = vec![0.0; model.r];
    let envelope_anchor = trace_ft(model, cutoff, beta, &zero, lambda_min, tol)?.value().norm();
    let below_envelope = samples
        .iter()
        .map(|p| {
            let bound = crate::special::ln_add_exp(p.ln_abs(), p.result.cert.ln_error_bound());
            bound <= envelope_anchor.ln() + DECAY_EXPONENT * (p.lambda / lambda_min).ln()
        })
        .collect();
    let literal_fit = fit_ln_min(&ln_samples(&samples, false), 6).ok();
    let resolved_samples = ln_samples(&samples, true);
    let resolved = resolved_samples.len();
    let resolved_fit = fit_ln_min(&resolved_samples, 3).ok();
    let pass = resolved_fit.is_some_and(|f| f.exponent <= DECAY_EXPONENT);
    Ok(NonPeriodReport { samples, envelope_anchor, below_envelope, literal_fit, resolved_fit, resolved, pass })
}
