use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub exponent: f64,
    pub coefficient: f64,
    pub ln_coefficient: f64,
    pub r_squared: f64,
    /// `|exponent(first half) - exponent(second half)|`.
    pub stability: f64,
    pub samples: usize,
    /// Set when the lowest decade was dropped because the full fit was unstable.
    #[serde(default)]
    pub discarded_low_decade: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_linear(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(LabError::DegenerateFit(format!("need matching samples, got {} and {}", n, y.len())));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LabError::DegenerateFit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(LinearFit { slope, intercept, r_squared })
}

/// Least-squares fit of `ln|value|` against `ln lambda`; needs at least six samples.
pub fn fit_power_law(samples: &[(f64, f64)]) -> Result<FitReport> {
    let ln: Vec<(f64, f64)> = samples
        .iter()
        .map(|&(l, v)| {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LabError::DegenerateFit(format!("magnitude {v} at lambda={l}")));
            }
            Ok((l, v.ln()))
        })
        .collect::<Result<_>>()?;
    fit_power_law_ln(&ln)
}

/// Same as [`fit_power_law`] with samples given as `(lambda, ln|value|)`.
pub fn fit_power_law_ln(samples: &[(f64, f64)]) -> Result<FitReport> {
    fit_ln_min(samples, 6)
}

pub(crate) fn fit_ln_min(samples: &[(f64, f64)], min_samples: usize) -> Result<FitReport> {
    if samples.len() < min_samples {
        return Err(LabError::DegenerateFit(format!("{} samples, need {min_samples}", samples.len())));
    }
    if let Some(&(l, v)) = samples.iter().find(|(l, v)| !(*l > 0.0) || !v.is_finite()) {
        return Err(LabError::DegenerateFit(format!("sample ({l}, {v}) is not usable")));
    }
    let x: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let full = fit_linear(&x, &y)?;
    let n = samples.len();
    let half = n.div_ceil(2);
    let stability = if half >= 2 {
        let first = fit_linear(&x[..half], &y[..half])?;
        let second = fit_linear(&x[n - half..], &y[n - half..])?;
        (first.slope - second.slope).abs()
    } else {
        0.0
    };
    Ok(FitReport {
        exponent: full.slope,
        coefficient: full.intercept.exp(),
        ln_coefficient: full.intercept,
        r_squared: full.r_squared,
        stability,
        samples: n,
        discarded_low_decade: false,
    })
}

/// Fits, and refits without the lowest decade when the stability exceeds
/// `threshold` and enough samples remain. The report records the discard.
pub fn fit_power_law_ln_stable(samples: &[(f64, f64)], threshold: f64) -> Result<FitReport> {
    let report = fit_power_law_ln(samples)?;
    if report.stability <= threshold {
        return Ok(report);
    }
    let floor = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min) * 10.0;
    let kept: Vec<(f64, f64)> = samples.iter().copied().filter(|s| s.0 >= floor * (1.0 - 1e-12)).collect();
    if kept.len() < 6 {
        return Ok(report);
    }
    let mut refit = fit_power_law_ln(&kept)?;
    refit.discarded_low_decade = true;
    Ok(refit)
}
