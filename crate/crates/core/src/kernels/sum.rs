//! Certified lattice sums over the joint spectrum.
//!
//! Terms are grouped by level. Each level is reduced on its own (offsets in
//! lexicographic order, pairwise), and the level partials are combined by a
//! pairwise tree whose shape depends only on the level range, so the result
//! does not depend on how the levels were split across threads.

use super::cutoff::Cutoff;
use super::reduce::{pairwise_complex, pairwise_ln, pairwise_real, pairwise_scaled, ScaledComplex};
use crate::error::{LabError, Result};
use crate::model::ToricModel;
use crate::special::{ln_add_exp, phase_mod_2pi};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Per-term evaluation error budget, relative to the term's magnitude.
const TERM_ERROR_TRACE: f64 = 1e-14;
const TERM_ERROR_DIAGONAL: f64 = 1e-13;
const MAX_REFINEMENTS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Absolute(f64),
    Relative(f64),
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::Absolute(1e-10)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationCertificate {
    pub radius: f64,
    /// Bound on the omitted terms; may underflow to 0 when `ln_tail_bound` is tiny.
    pub tail_bound: f64,
    pub ln_tail_bound: f64,
    /// Bound on floating-point error in the evaluated terms and their reduction.
    pub rounding_bound: f64,
    pub ln_rounding_bound: f64,
    pub terms: u64,
    pub levels: Option<(u64, u64)>,
    /// Whether the tail bound meets the requested tolerance.
    pub met: bool,
}

impl TruncationCertificate {
    /// `ln(tail_bound + rounding_bound)`.
    pub fn ln_error_bound(&self) -> f64 {
        ln_add_exp(self.ln_tail_bound, self.ln_rounding_bound)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SumResult {
    pub value: ScaledComplex,
    /// `ln sum |term|` over the evaluated window.
    pub ln_abs_sum: f64,
    pub cert: TruncationCertificate,
}

impl SumResult {
    pub fn value(&self) -> Complex64 {
        self.value.to_complex()
    }

    pub fn ln_abs(&self) -> f64 {
        self.value.ln_abs()
    }

    /// Whether `|value|` exceeds the combined tail and rounding bound.
    pub fn resolved(&self) -> bool {
        self.ln_abs() > self.cert.ln_error_bound()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Weighting<'a> {
    /// Weights `rho_{l,k}(s)` at the given moment coordinates.
    Diagonal(&'a [f64]),
    /// Weight one per spectral point.
    Trace,
}

impl Weighting<'_> {
    /// `ln` of the constant in the level majorant `W_l = (l+1)^n * scale`.
    fn ln_level_scale(&self, n: usize) -> f64 {
        match self {
            Weighting::Diagonal(_) => -(n as f64) * PI.ln(),
            Weighting::Trace => 0.0,
        }
    }

    fn term_error(&self) -> f64 {
        match self {
            Weighting::Diagonal(_) => TERM_ERROR_DIAGONAL,
            Weighting::Trace => TERM_ERROR_TRACE,
        }
    }
}

struct WindowSum {
    value: ScaledComplex,
    ln_abs_sum: f64,
    terms: u64,
    levels: Option<(u64, u64)>,
}

fn sum_window(model: &ToricModel, cutoff: &Cutoff, center: &[f64], s0: &[f64], radius: f64, w: Weighting) -> WindowSum {
    let Some((lo, hi)) = model.level_range(center, radius) else {
        return WindowSum { value: ScaledComplex::ZERO, ln_abs_sum: f64::NEG_INFINITY, terms: 0, levels: None };
    };
    let partials: Vec<(ScaledComplex, f64, u64)> = (lo..=hi)
        .into_par_iter()
        .map(|level| {
            let mut ln_mag = Vec::new();
            let mut phases = Vec::new();
            model.for_each_in_ball(level, center, radius, |k, lam| {
                let dist = lam.iter().zip(center).map(|(x, c)| (c - x) * (c - x)).sum::<f64>().sqrt();
                let (ln_hat, negative) = cutoff.ln_abs_hat_radial(dist);
                let ln_w = match w {
                    Weighting::Diagonal(s) => model.ln_amplitude_unchecked(level, k, s),
                    Weighting::Trace => 0.0,
                };
                let l = ln_hat + ln_w;
                if l == f64::NEG_INFINITY {
                    return;
                }
                let mut phase = phase_mod_2pi(lam, s0);
                if negative {
                    phase += PI;
                }
                ln_mag.push(l);
                phases.push(phase);
            });
            if ln_mag.is_empty() {
                return (ScaledComplex::ZERO, f64::NEG_INFINITY, 0);
            }
            let top = ln_mag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mags: Vec<f64> = ln_mag.iter().map(|l| (l - top).exp()).collect();
            let terms: Vec<Complex64> = mags.iter().zip(&phases).map(|(&m, &p)| Complex64::from_polar(m, p)).collect();
            let value = ScaledComplex::new(pairwise_complex(&terms), top);
            (value, top + pairwise_real(&mags).ln(), ln_mag.len() as u64)
        })
        .collect();
    let values: Vec<ScaledComplex> = partials.iter().map(|p| p.0).collect();
    let abs: Vec<f64> = partials.iter().map(|p| p.1).collect();
    WindowSum {
        value: pairwise_scaled(&values),
        ln_abs_sum: pairwise_ln(&abs),
        terms: partials.iter().map(|p| p.2).sum(),
        levels: Some((lo, hi)),
    }
}

/// `ln` of a rigorous bound on every term outside the ball of `radius`:
/// `sum_l env(max(R, d_l)) W_l`.
fn ln_tail_bound(model: &ToricModel, cutoff: &Cutoff, center: &[f64], radius: f64, w: Weighting) -> f64 {
    let n = model.d;
    let ln_scale = w.ln_level_scale(n);
    let delta0 = model.polytope.distance_to_origin();
    let c = center.iter().map(|x| x * x).sum::<f64>().sqrt();
    let analytic_from = (2.0 * (c + radius) / delta0).ceil() as u64 + 1;
    let mut acc = f64::NEG_INFINITY;
    let mut level = 0u64;
    loop {
        let d = model.level_distance(center, level);
        let term = cutoff.ln_envelope(d.max(radius)) + n as f64 * ((level + 1) as f64).ln() + ln_scale;
        acc = ln_add_exp(acc, term);
        if level >= analytic_from {
            let rem = cutoff.ln_level_tail(level + 1, n, delta0, c, ln_scale);
            if rem.is_finite() && (rem < acc - 40.0 || level >= 8 * analytic_from) {
                return ln_add_exp(acc, rem);
            }
            if level >= 64 * analytic_from {
                return f64::INFINITY;
            }
        }
        level += 1;
    }
}

/// Distance from `center` to the nearest dilated polytope `l P`.
fn cone_distance(model: &ToricModel, center: &[f64]) -> f64 {
    let delta0 = model.polytope.distance_to_origin();
    let c = center.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (mut lo, mut hi) = (0u64, (c / delta0).ceil() as u64 + 2);
    // level_distance is convex in the level
    while hi - lo > 2 {
        let m1 = lo + (hi - lo) / 3;
        let m2 = hi - (hi - lo) / 3;
        if model.level_distance(center, m1) <= model.level_distance(center, m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    (lo..=hi).map(|l| model.level_distance(center, l)).fold(f64::INFINITY, f64::min)
}

pub(crate) fn lattice_sum(
    model: &ToricModel,
    cutoff: &Cutoff,
    beta: &[f64],
    s0: &[f64],
    lambda: f64,
    w: Weighting,
    tol: Tolerance,
) -> Result<SumResult> {
    for len in [beta.len(), s0.len(), cutoff.dim()] {
        if len != model.r {
            return Err(LabError::DimensionMismatch { expected: model.r, got: len });
        }
    }
    if let Weighting::Diagonal(s) = w {
        if s.len() != model.d {
            return Err(LabError::DimensionMismatch { expected: model.d, got: s.len() });
        }
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(LabError::InvalidArgument(format!("lambda {lambda} must be positive")));
    }
    let (t, relative) = match tol {
        Tolerance::Absolute(t) => (t, false),
        Tolerance::Relative(t) => (t, true),
    };
    if !(t > 0.0) {
        return Err(LabError::InvalidArgument(format!("tolerance {t} must be positive")));
    }
    let center: Vec<f64> = beta.iter().map(|b| lambda * b).collect();
    let global_phase = -phase_mod_2pi(&center, s0);
    let max_radius = cutoff.max_radius();
    let mut radius = (cone_distance(model, &center) + cutoff.radius_for_ln_level(t.ln())).min(max_radius);

    let mut refinements = 0;
    loop {
        let window = sum_window(model, cutoff, &center, s0, radius, w);
        let ln_tail = ln_tail_bound(model, cutoff, &center, radius, w);
        let ln_target = if relative {
            let scale = if window.value.is_zero() { window.ln_abs_sum } else { window.value.ln_abs() };
            t.ln() + scale
        } else {
            t.ln()
        };
        let met = ln_tail <= ln_target;
        refinements += 1;
        if met || radius >= max_radius || refinements >= MAX_REFINEMENTS {
            let n_terms = window.terms.max(1) as f64;
            let ln_rounding = window.ln_abs_sum
                + (w.term_error() + f64::EPSILON * 0.5 * (n_terms.log2().ceil() + 4.0)).ln();
            let cert = TruncationCertificate {
                radius,
                tail_bound: ln_tail.exp(),
                ln_tail_bound: ln_tail,
                rounding_bound: ln_rounding.exp(),
                ln_rounding_bound: ln_rounding,
                terms: window.terms,
                levels: window.levels,
                met,
            };
            return Ok(SumResult { value: window.value.scale_by_phase(global_phase), ln_abs_sum: window.ln_abs_sum, cert });
        }
        let ln_weights = ln_tail - cutoff.ln_envelope(radius);
        let estimate = if ln_target.is_finite() && ln_weights.is_finite() {
            cutoff.radius_for_ln_level(ln_target - ln_weights - 1.0)
        } else {
            f64::NAN
        };
        radius = if estimate > radius { estimate.min(4.0 * radius + 1.0) } else { 1.5 * radius + 1.0 };
        radius = radius.min(max_radius);
    }
}
