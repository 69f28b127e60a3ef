//! Leading-order predictions for the smoothed projector diagonal and for the
//! directional Fourier transform of the trace.

use crate::error::{LabError, Result};
use crate::geometry::{
    cal_d, fixed_locus, linearization, meridian_normal_fraction, moment_map, psi2, FixedComponent, RayLocus,
};
use crate::kernels::Cutoff;
use crate::model::{PointM, ToricModel};
use crate::quadrature::simpson_doubling;
use num_complex::Complex64;
use std::cell::RefCell;
use std::f64::consts::PI;

const ON_LOCUS_TOL: f64 = 1e-8;
const LOCUS_QUAD_TOL: f64 = 1e-8;

/// Scaling-limit profile `exp([psi2(A w, w) - 2|n|^2] / |Phi|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub phi_norm: f64,
    /// Rotation angles of the return map on the normal blocks.
    pub angles: Vec<f64>,
}

impl Profile {
    /// `w` is an interleaved vector in the rotated normal blocks, `normal_sq` is `|n|^2`.
    pub fn eval(&self, w: &[f64], normal_sq: f64) -> Result<Complex64> {
        if w.len() != 2 * self.angles.len() {
            return Err(LabError::DimensionMismatch { expected: 2 * self.angles.len(), got: w.len() });
        }
        let aw = crate::geometry::apply_rotation(&self.angles, w)?;
        let q = if w.is_empty() { Complex64::new(0.0, 0.0) } else { psi2(&aw, w)? };
        Ok(((q - 2.0 * normal_sq) / self.phi_norm).exp())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub exponent: f64,
    pub coefficient: Complex64,
    /// The prediction oscillates as `exp(-i lambda phase_rate)`.
    pub phase_rate: f64,
    pub profile: Profile,
    pub profile_value: Complex64,
}

impl Prediction {
    pub fn value_at(&self, lambda: f64) -> Complex64 {
        self.coefficient
            * self.profile_value
            * lambda.powf(self.exponent)
            * Complex64::from_polar(1.0, -(lambda * self.phase_rate).rem_euclid(2.0 * PI))
    }

    pub fn magnitude_at(&self, lambda: f64) -> f64 {
        (self.coefficient * self.profile_value).norm() * lambda.powf(self.exponent)
    }
}

fn component_through<'a>(components: &'a [FixedComponent], s: &[f64]) -> Option<&'a FixedComponent> {
    components.iter().find(|c| c.contains(s))
}

/// Leading term of `S(lambda beta, s0, x, x)` for `x` on `M_beta` and on a
/// lifting fixed component of `s0`. The profile is evaluated at the normal
/// block vector `w` (two entries per pole factor of the component, may be empty
/// for all zeros) and at a displacement of arclength `n_arclength` along the
/// meridian of factor `n_factor`.
#[allow(clippy::too_many_arguments)]
pub fn predict_diag_leading(
    model: &ToricModel,
    point: &PointM,
    s0: &[f64],
    beta: &[f64],
    cutoff: &Cutoff,
    w: &[f64],
    n_arclength: f64,
    n_factor: usize,
) -> Result<Prediction> {
    if point.s.len() != model.d {
        return Err(LabError::DimensionMismatch { expected: model.d, got: point.s.len() });
    }
    if beta.len() != model.r {
        return Err(LabError::DimensionMismatch { expected: model.r, got: beta.len() });
    }
    let m = moment_map(model, point);
    let off = m.phi_unit.iter().zip(beta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if off > ON_LOCUS_TOL {
        return Err(LabError::NotOnLocus(point.s.clone()));
    }
    let info = fixed_locus(model, s0)?;
    let component = component_through(&info.components, &point.s).ok_or(LabError::NotAPeriod)?;
    let lin = linearization(component)?;

    let d = model.d as f64;
    let r = model.r as f64;
    let exponent = d + 0.5 * (1.0 - r);
    let magnitude = 2f64.powf(0.5 * (r + 1.0)) * PI / m.norm * (PI * m.norm).powf(-exponent) * cutoff.chi_at_origin()
        / cal_d(model, point)?;

    let w_full = if w.is_empty() { vec![0.0; 2 * lin.angles.len()] } else { w.to_vec() };
    let normal_sq = if n_arclength == 0.0 {
        0.0
    } else {
        n_arclength * n_arclength * meridian_normal_fraction(model, point, n_factor)?
    };
    let profile = Profile { phi_norm: m.norm, angles: lin.angles };
    let profile_value = profile.eval(&w_full, normal_sq)?;
    Ok(Prediction {
        exponent,
        coefficient: Complex64::new(magnitude, 0.0),
        phase_rate: beta.iter().zip(s0).map(|(b, s)| b * s).sum(),
        profile,
        profile_value,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePrediction {
    pub component: FixedComponent,
    pub prediction: Prediction,
    /// `integral |Phi|^{-(f+2-r)} / D dV` over the component's part of `M_beta`.
    pub integral: f64,
    pub poincare: Complex64,
}

/// Riemannian volume density of `M_beta` at parameter `t` along the ray locus.
/// Pole factors contribute nothing; each free factor carries a circle of
/// circumference `2 pi sqrt(p)` with `p = s(1-s)`.
fn locus_density(beta: &[f64], s: &[f64], free: &[usize], segment: bool) -> f64 {
    let p: Vec<f64> = free.iter().map(|&i| s[i] * (1.0 - s[i])).collect();
    let tau = (2.0 * PI).powi(free.len() as i32);
    if !segment {
        return tau * p.iter().map(|x| x.max(0.0).sqrt()).product::<f64>();
    }
    // the tangent direction ds/dt = beta has length^2 sum beta_i^2 / (4 p_i)
    // in the metric, so the density is (2 pi)^n/2 sqrt(sum beta_i^2 prod_{j != i} p_j)
    let mut acc = 0.0;
    for (a, &i) in free.iter().enumerate() {
        let others: f64 = p.iter().enumerate().filter(|(b, _)| *b != a).map(|(_, x)| *x).product();
        acc += beta[i] * beta[i] * others;
    }
    tau * 0.5 * acc.max(0.0).sqrt()
}

/// Leading term of the trace transform near `s0`: one entry per phase-compatible
/// fixed component that meets `M_beta`.
pub fn predict_trace_leading(
    model: &ToricModel,
    s0: &[f64],
    beta: &[f64],
    cutoff: &Cutoff,
) -> Result<Vec<TracePrediction>> {
    if beta.len() != model.r {
        return Err(LabError::DimensionMismatch { expected: model.r, got: beta.len() });
    }
    let info = fixed_locus(model, s0)?;
    let r = model.r as f64;
    let phase_rate: f64 = beta.iter().zip(s0).map(|(b, s)| b * s).sum();
    let mut out = Vec::new();
    for component in info.components.iter().filter(|c| c.phase_ok) {
        let locus = RayLocus::solve_with_poles(model, beta, &component.pole_values());
        let free: Vec<usize> = (0..model.d).filter(|&i| component.poles[i].is_none()).collect();
        let f = component.fixed_dim as f64;
        let power = f + 2.0 - r;
        let integrand = |t: f64, segment: bool| -> Result<f64> {
            let p = RayLocus::point_at(model, beta, t);
            let density = locus_density(beta, &p.s, &free, segment);
            if density == 0.0 {
                return Ok(0.0);
            }
            let norm = moment_map(model, &p).norm;
            Ok(norm.powf(-power) * density / cal_d(model, &p)?)
        };
        let integral = match locus {
            RayLocus::Empty => continue,
            RayLocus::Point { t } => integrand(t, false)?,
            RayLocus::Segment { t0, t1 } => {
                let err = RefCell::new(None);
                let v = simpson_doubling(
                    |t| {
                        integrand(t, true).unwrap_or_else(|e| {
                            err.borrow_mut().get_or_insert(e);
                            0.0
                        })
                    },
                    t0,
                    t1,
                    LOCUS_QUAD_TOL,
                )?;
                if let Some(e) = err.into_inner() {
                    return Err(e);
                }
                v
            }
        };
        let lin = linearization(component)?;
        let exponent = f + 1.0 - r;
        let coefficient =
            2.0 * PI / lin.poincare * PI.powf(-exponent) * cutoff.chi_at_origin() * integral;
        out.push(TracePrediction {
            component: component.clone(),
            prediction: Prediction {
                exponent,
                coefficient,
                phase_rate,
                profile: Profile { phi_norm: 1.0, angles: lin.angles.clone() },
                profile_value: Complex64::new(1.0, 0.0),
            },
            integral,
            poincare: lin.poincare,
        });
    }
    if out.is_empty() {
        return Err(LabError::EmptyLocus);
    }
    Ok(out)
}

/// Sum of the component predictions at `lambda`.
pub fn trace_prediction_total(predictions: &[TracePrediction], lambda: f64) -> Complex64 {
    predictions.iter().map(|p| p.prediction.value_at(lambda)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Direction;
    use crate::kernels::{smoothed_projector_diag, trace_ft, Tolerance};

    fn dir(v: &[f64]) -> Vec<f64> {
        Direction::normalized(v).unwrap().as_slice().to_vec()
    }

    #[test]
    fn cp1_diag_is_linear() {
        // |Phi| = 1 + s, so the leading term is 2 chi(0) lambda / (1 + s)^2
        let m = ToricModel::cp1();
        let c = Cutoff::gaussian(0.5, 1).unwrap();
        let p = PointM::new(vec![0.3]).unwrap();
        let pred = predict_diag_leading(&m, &p, &[0.0], &[1.0], &c, &[], 0.0, 0).unwrap();
        assert_eq!(pred.exponent, 1.0);
        assert!((pred.coefficient.re - 2.0 / 1.69).abs() < 1e-13);
        let s = smoothed_projector_diag(&m, &c, &[1.0], &[0.0], 2000.0, &p, Tolerance::default()).unwrap();
        assert!((s.value().re / pred.value_at(2000.0).re - 1.0).abs() < 2e-3);
    }

    #[test]
    fn cp1_trace_is_pi_lambda() {
        let m = ToricModel::cp1();
        let c = Cutoff::gaussian(0.5, 1).unwrap();
        let preds = predict_trace_leading(&m, &[0.0], &[1.0], &c).unwrap();
        assert_eq!(preds.len(), 1);
        assert!((preds[0].integral - PI / 2.0).abs() < 1e-7);
        assert!((preds[0].prediction.coefficient.re - PI).abs() < 1e-7);
    }

    #[test]
    fn augmented_trace_constant() {
        let m = ToricModel::augmented_cp1();
        let c = Cutoff::gaussian(0.5, 2).unwrap();
        let preds = predict_trace_leading(&m, &[0.0, 0.0], &dir(&[1.5, 1.0]), &c).unwrap();
        assert_eq!(preds[0].prediction.exponent, 0.0);
        assert!((preds[0].prediction.coefficient.re - 4.0 * PI * PI).abs() < 1e-6);
    }

    #[test]
    fn off_locus_and_unfixed_points_are_rejected() {
        let m = ToricModel::augmented_cp1();
        let c = Cutoff::gaussian(0.5, 2).unwrap();
        let beta = dir(&[1.5, 1.0]);
        let off = PointM::new(vec![0.2]).unwrap();
        assert!(matches!(
            predict_diag_leading(&m, &off, &[0.0, 0.0], &beta, &c, &[], 0.0, 0),
            Err(LabError::NotOnLocus(_))
        ));
        // s0 = (pi, 0): only the poles are fixed, and the interior point is not
        let on = PointM::new(vec![0.5]).unwrap();
        assert!(matches!(
            predict_diag_leading(&m, &on, &[PI, 0.0], &beta, &c, &[], 0.0, 0),
            Err(LabError::NotAPeriod)
        ));
    }

    #[test]
    fn empty_locus_for_trace() {
        let m = ToricModel::augmented_cp1();
        let c = Cutoff::gaussian(0.5, 2).unwrap();
        assert!(matches!(
            predict_trace_leading(&m, &[0.0, 0.0], &dir(&[1.0, 4.0]), &c),
            Err(LabError::EmptyLocus)
        ));
    }

    #[test]
    fn pole_rotation_sign_matches_lattice_sum() {
        // a = 2, s0 = 2 pi / 3: only the top pole lifts (phase 3 * 2 pi / 3)
        let m = ToricModel::new(&[2], &[]).unwrap();
        let c = Cutoff::gaussian(0.15, 1).unwrap();
        let s0 = [2.0 * PI / 3.0];
        let preds = predict_trace_leading(&m, &s0, &[1.0], &c).unwrap();
        assert_eq!(preds.len(), 1);
        assert_eq!(preds[0].component.poles[0], Some(crate::geometry::Pole::Top));
        let lambda = 60.3;
        let got = trace_ft(&m, &c, &[1.0], &s0, lambda, Tolerance::Absolute(1e-14)).unwrap().value();
        let want = trace_prediction_total(&preds, lambda);
        assert!((got / want - 1.0).norm() < 1e-6, "{got} vs {want}");
    }
}
