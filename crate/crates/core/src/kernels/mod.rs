//! Smoothed spectral projector diagonals, the directional Fourier transform
//! of the trace, and eigenvalue clusters near the ray.

mod cutoff;
mod reduce;
mod sum;

pub use cutoff::{Cutoff, CutoffKind, BUMP_ENVELOPE_POWER};
pub use reduce::ScaledComplex;
pub use sum::{SumResult, Tolerance, TruncationCertificate};

use crate::error::{LabError, Result};
use crate::geometry::nearest_other_period;
use crate::model::{spectral_order, PointM, SpectralPoint, ToricModel};
use sum::{lattice_sum, Weighting};

/// `S(lambda beta, s0, x, x) = sum e^{-i<lambda beta - Lambda, s0>} hat(lambda beta - Lambda) rho_Lambda(x)`.
pub fn smoothed_projector_diag(
    model: &ToricModel,
    cutoff: &Cutoff,
    beta: &[f64],
    s0: &[f64],
    lambda: f64,
    point: &PointM,
    tol: Tolerance,
) -> Result<SumResult> {
    lattice_sum(model, cutoff, beta, s0, lambda, Weighting::Diagonal(&point.s), tol)
}

/// `e^{-i lambda <beta, s0>} sum_Lambda e^{i<Lambda, s0>} hat(lambda beta - Lambda)`.
pub fn trace_ft(
    model: &ToricModel,
    cutoff: &Cutoff,
    beta: &[f64],
    s0: &[f64],
    lambda: f64,
    tol: Tolerance,
) -> Result<SumResult> {
    lattice_sum(model, cutoff, beta, s0, lambda, Weighting::Trace, tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterEntry {
    pub point: SpectralPoint,
    pub weight: f64,
}

/// Spectral points within `radius` of `lambda beta` with their cutoff weights.
/// A slack of `1e-9 max(1, |lambda beta|)` absorbs rounding in `lambda beta`.
pub fn eigenvalue_cluster(
    model: &ToricModel,
    cutoff: &Cutoff,
    beta: &[f64],
    lambda: f64,
    radius: f64,
) -> Result<Vec<ClusterEntry>> {
    if beta.len() != model.r {
        return Err(LabError::DimensionMismatch { expected: model.r, got: beta.len() });
    }
    if !(radius >= 0.0) {
        return Err(LabError::InvalidArgument(format!("radius {radius} must be nonnegative")));
    }
    let center: Vec<f64> = beta.iter().map(|b| lambda * b).collect();
    let norm = center.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut points = model.collect_ball(&center, radius + 1e-9 * norm.max(1.0));
    points.sort_by(spectral_order);
    points
        .into_iter()
        .map(|p| {
            let xi: Vec<f64> = center.iter().zip(&p.eigenvalue).map(|(c, l)| c - l).collect();
            Ok(ClusterEntry { weight: cutoff.hat(&xi)?, point: p })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodGap {
    /// Distance from `s0` to the nearest piece of the period set not through `s0`.
    pub gap: f64,
    /// Fraction of the mass of `chi` beyond half that distance.
    pub mass_beyond_half_gap: f64,
}

pub fn period_gap(model: &ToricModel, cutoff: &Cutoff, s0: &[f64]) -> Result<PeriodGap> {
    let gap = nearest_other_period(model, s0)?;
    Ok(PeriodGap { gap, mass_beyond_half_gap: cutoff.mass_beyond(0.5 * gap) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Direction;
    use num_complex::Complex64;

    fn dir(v: &[f64]) -> Vec<f64> {
        Direction::normalized(v).unwrap().as_slice().to_vec()
    }

    #[test]
    fn far_from_cone_is_bounded_by_tail() {
        let m = ToricModel::augmented_cp1();
        let c = Cutoff::gaussian(0.5, 2).unwrap();
        // the direction (1, 4) stays far from the cone over the polytope
        let res = trace_ft(&m, &c, &dir(&[1.0, 4.0]), &[0.0, 0.0], 200.0, Tolerance::default()).unwrap();
        assert!(res.value().norm() <= res.cert.tail_bound.max(1e-300));
        assert!(res.cert.met);
    }

    #[test]
    fn narrow_cutoff_on_lattice_point_is_two_term_oracle() {
        // sigma = 10: hat has width 0.1, so only the lattice point under lambda beta matters
        let m = ToricModel::augmented_cp1();
        let c = Cutoff::gaussian(10.0, 2).unwrap();
        let beta = dir(&[3.0, 2.0]);
        let target = [30.0, 20.0];
        let lambda = (30.0f64 * 30.0 + 20.0 * 20.0).sqrt();
        let point = PointM::new(vec![0.4]).unwrap();
        let res = smoothed_projector_diag(&m, &c, &beta, &[0.0, 0.0], lambda, &point, Tolerance::default()).unwrap();
        let rho = m.diagonal_amplitude(20, &[10], &point).unwrap();
        let xi: Vec<f64> = beta.iter().zip(&target).map(|(b, t)| lambda * b - t).collect();
        let want = c.hat(&xi).unwrap() * rho;
        assert!((res.value().re / want - 1.0).abs() < 1e-6);
        assert!((c.hat(&[0.0, 0.0]).unwrap() * rho / want - 1.0).abs() < 1e-6);
    }

    #[test]
    fn positivity_at_zero_period() {
        let m = ToricModel::cp1_cp1();
        let c = Cutoff::gaussian(0.5, 2).unwrap();
        let p = PointM::new(vec![0.5, 0.25]).unwrap();
        let res = smoothed_projector_diag(&m, &c, &dir(&[1.5, 2.2]), &[0.0, 0.0], 300.0, &p, Tolerance::default()).unwrap();
        let v = res.value();
        assert!(v.re > 0.0);
        assert!(v.im.abs() < 1e-14 * v.re);
    }

    #[test]
    fn doubling_radius_moves_sum_less_than_tail() {
        let m = ToricModel::augmented_cp1();
        let c = Cutoff::gaussian(1.0, 2).unwrap();
        let beta = dir(&[1.5, 1.0]);
        let res = trace_ft(&m, &c, &beta, &[0.3, 0.1], 150.0, Tolerance::Absolute(1e-10)).unwrap();
        let wide = trace_ft(&m, &c, &beta, &[0.3, 0.1], 150.0, Tolerance::Absolute(1e-16)).unwrap();
        assert!(wide.cert.radius > res.cert.radius);
        let diff = (wide.value() - res.value()).norm();
        assert!(diff <= res.cert.tail_bound + res.cert.rounding_bound + wide.cert.rounding_bound);
    }

    #[test]
    fn bump_certificate_meets_tolerance() {
        let m = ToricModel::cp1();
        let c = Cutoff::bump(0.5, 1).unwrap();
        // the tabulated transform is only known to quadrature noise, so the
        // certificate floor sits near (level multiplicity) * 1e-15
        let res = trace_ft(&m, &c, &[1.0], &[0.0], 40.0, Tolerance::Absolute(1e-7)).unwrap();
        assert!(res.cert.radius.is_finite());
        assert!(res.cert.met, "{:?}", res.cert);
        assert!(res.cert.tail_bound < 1e-7);
    }

    #[test]
    fn cluster_examples() {
        let m = ToricModel::augmented_cp1();
        let c = Cutoff::gaussian(0.5, 2).unwrap();
        let beta = dir(&[1.5, 1.0]);
        let lambda = 100.0;
        let entries = eigenvalue_cluster(&m, &c, &beta, lambda, 3.0).unwrap();
        let center: Vec<f64> = beta.iter().map(|b| lambda * b).collect();
        let brute = m.enumerate_spectrum(&center, 3.0 + 1e-7).unwrap();
        assert_eq!(entries.len(), brute.len());
        assert!(entries.iter().all(|e| e.weight > 0.0));

        // off-lattice centre, tiny radius
        assert!(eigenvalue_cluster(&m, &c, &beta, 100.3, 0.05).unwrap().is_empty());

        // lambda beta = (3, 2) exactly: level 2, offset 1
        let on = eigenvalue_cluster(&m, &c, &beta, 13f64.sqrt(), 0.0).unwrap();
        assert_eq!(on.len(), 1);
        assert_eq!((on[0].point.level, on[0].point.offsets[0]), (2, 1));
    }

    #[test]
    fn period_gap_report() {
        let c = Cutoff::gaussian(0.03, 2).unwrap();
        let g = period_gap(&ToricModel::augmented_cp1(), &c, &[0.3, 0.7]).unwrap();
        assert!(g.mass_beyond_half_gap < 1e-17);
        assert!((g.gap - 1.3 / 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn phase_convention_matches_definition() {
        // direct small sum with the defining formula
        let m = ToricModel::augmented_cp1();
        let c = Cutoff::gaussian(0.7, 2).unwrap();
        let beta = dir(&[1.4, 1.0]);
        let s0 = [0.4, -1.1];
        let lambda = 12.0;
        let res = trace_ft(&m, &c, &beta, &s0, lambda, Tolerance::Absolute(1e-14)).unwrap();
        let center: Vec<f64> = beta.iter().map(|b| lambda * b).collect();
        let mut want = Complex64::new(0.0, 0.0);
        for p in m.enumerate_spectrum(&center, 40.0).unwrap() {
            let xi: Vec<f64> = center.iter().zip(&p.eigenvalue).map(|(c, l)| c - l).collect();
            let ph: f64 = xi.iter().zip(&s0).map(|(a, b)| a * b).sum();
            want += Complex64::from_polar(c.hat(&xi).unwrap(), -ph);
        }
        assert!((res.value() - want).norm() < 1e-12 * want.norm().max(1.0));
    }
}
