//! Moment-map geometry of the toric models: Φ and its direction, the Gram
//! matrix of the infinitesimal action, the kernel of Φ(m) and the density 𝒟.

mod fixed;
mod locus;

pub use fixed::{
    apply_rotation, fixed_locus, linearization, nearest_other_period, poincare_factor, psi2, FactorStatus,
    FixedComponent, FixedLocusInfo, Linearization, Pole,
};
pub use locus::{check_transversality, RayLocus, TransversalityReport};

use crate::error::{LabError, Result};
use crate::model::{PointM, ToricModel};
use nalgebra::{DMatrix, DVector};

/// Degeneracy threshold for Gram determinants and margins.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    beta: Vec<f64>,
}

impl Direction {
    /// Accepts a vector that is already unit length (within 1e-12).
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        let norm = euclid(&beta);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(LabError::InvalidArgument(format!("direction has norm {norm}, expected 1")));
        }
        Ok(Self { beta })
    }

    pub fn normalized(v: &[f64]) -> Result<Self> {
        let norm = euclid(v);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(LabError::InvalidArgument("direction must be a nonzero finite vector".into()));
        }
        Ok(Self { beta: v.iter().map(|x| x / norm).collect() })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.beta
    }

    /// Whether the ray through this direction meets the moment polytope.
    pub fn in_cone(&self, model: &ToricModel) -> bool {
        !matches!(RayLocus::solve(model, &self.beta), RayLocus::Empty)
    }
}

pub(crate) fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentData {
    pub phi: Vec<f64>,
    pub phi_unit: Vec<f64>,
    /// Covector dual to `phi_unit`, so that `<phi, xi> = |phi|`.
    pub xi: Vec<f64>,
    pub norm: f64,
}

pub fn moment_map(model: &ToricModel, point: &PointM) -> MomentData {
    let phi = moment_vector(model, &point.s);
    let norm = euclid(&phi);
    let phi_unit: Vec<f64> = phi.iter().map(|x| x / norm).collect();
    MomentData { xi: phi_unit.clone(), phi_unit, phi, norm }
}

pub(crate) fn moment_vector(model: &ToricModel, s: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = model.shifts().iter().zip(s).map(|(&a, &si)| a as f64 + si).collect();
    phi.extend_from_slice(model.constants());
    phi
}

/// `G_kl = g(v_k, v_l)`: diagonal `s(1-s)` on factors, zero on constants.
pub fn metric_gram(model: &ToricModel, point: &PointM) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(model.r, model.r);
    for (i, &s) in point.s.iter().enumerate() {
        g[(i, i)] = s * (1.0 - s);
    }
    g
}

/// Orthonormal basis of `phi^perp` as the columns of an `r x (r-1)` matrix.
pub fn kernel_basis(model: &ToricModel, point: &PointM) -> DMatrix<f64> {
    let phi = moment_vector(model, &point.s);
    complement_basis(&phi)
}

pub(crate) fn complement_basis(v: &[f64]) -> DMatrix<f64> {
    let r = v.len();
    if r <= 1 {
        return DMatrix::zeros(r, 0);
    }
    let norm = euclid(v);
    let mut h = DVector::from_iterator(r, v.iter().map(|x| x / norm));
    let sign = if h[0] >= 0.0 { 1.0 } else { -1.0 };
    h[0] += sign;
    let hh = h.dot(&h);
    let reflector = DMatrix::identity(r, r) - (&h * h.transpose()) * (2.0 / hh);
    reflector.columns(1, r - 1).into_owned()
}

pub(crate) fn kernel_gram(model: &ToricModel, s: &[f64], basis: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(basis.ncols(), basis.ncols());
    for a in 0..basis.ncols() {
        for b in 0..basis.ncols() {
            let mut acc = 0.0;
            for (i, &si) in s.iter().enumerate().take(model.d) {
                acc += basis[(i, a)] * basis[(i, b)] * si * (1.0 - si);
            }
            m[(a, b)] = acc;
        }
    }
    m
}

/// 𝒟(m) = sqrt det(Kᵀ G K) over an orthonormal basis `K` of ker Φ(m).
pub fn cal_d(model: &ToricModel, point: &PointM) -> Result<f64> {
    let basis = kernel_basis(model, point);
    cal_d_with_basis(model, point, &basis)
}

/// Same as [`cal_d`] for a caller-supplied orthonormal kernel basis.
pub fn cal_d_with_basis(model: &ToricModel, point: &PointM, basis: &DMatrix<f64>) -> Result<f64> {
    if basis.ncols() == 0 {
        return Ok(1.0);
    }
    let det = kernel_gram(model, &point.s, basis).determinant();
    if det <= DEGENERACY_TOL {
        return Err(LabError::DegenerateAt { point: point.s.clone(), det });
    }
    Ok(det.sqrt())
}

/// Squared fraction of a unit-speed factor meridian that is normal to `M_beta`
/// at `point`: `p_i (e_iᵀK)(KᵀGK)^{-1}(Kᵀe_i)`.
pub fn meridian_normal_fraction(model: &ToricModel, point: &PointM, factor: usize) -> Result<f64> {
    if factor >= model.d {
        return Err(LabError::InvalidArgument(format!("factor {factor} out of range")));
    }
    let basis = kernel_basis(model, point);
    if basis.ncols() == 0 {
        return Ok(0.0);
    }
    let gram = kernel_gram(model, &point.s, &basis);
    let det = gram.determinant();
    let inv = gram
        .try_inverse()
        .filter(|_| det > DEGENERACY_TOL)
        .ok_or_else(|| LabError::DegenerateAt { point: point.s.clone(), det })?;
    let row = basis.row(factor).transpose();
    let s = point.s[factor];
    Ok(s * (1.0 - s) * (row.transpose() * inv * &row)[(0, 0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &[f64]) -> PointM {
        PointM::new(s.to_vec()).unwrap()
    }

    #[test]
    fn moment_map_examples() {
        let aug = ToricModel::augmented_cp1();
        let m = moment_map(&aug, &p(&[0.5]));
        assert_eq!(m.phi, vec![1.5, 1.0]);
        assert!((m.norm - 3.25f64.sqrt()).abs() < 1e-15);
        let m = moment_map(&aug, &p(&[0.0]));
        assert!((m.phi_unit[0] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((m.phi_unit[1] - 0.5f64.sqrt()).abs() < 1e-15);
        let m = moment_map(&ToricModel::cp1_cp1(), &p(&[0.5, 0.0]));
        assert_eq!(m.phi, vec![1.5, 2.0]);
        let dot: f64 = m.phi.iter().zip(&m.xi).map(|(a, b)| a * b).sum();
        assert!((dot - m.norm).abs() < 1e-14);
    }

    /// Gram entry from the toric potential `u(s) = s ln s + (1-s) ln(1-s)`: `G = 1/u''`.
    #[test]
    fn gram_matches_toric_potential() {
        let u = |s: f64| s * s.ln() + (1.0 - s) * (1.0 - s).ln();
        for s in [0.5, 0.2, 0.83] {
            let h = 1e-4;
            let u2 = (u(s + h) - 2.0 * u(s) + u(s - h)) / (h * h);
            let g = metric_gram(&ToricModel::cp1(), &p(&[s]));
            assert!((g[(0, 0)] - 1.0 / u2).abs() < 1e-7);
        }
        let g = metric_gram(&ToricModel::augmented_cp1(), &p(&[0.5]));
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, 0.0]));
        let g = metric_gram(&ToricModel::cp1_cp1(), &p(&[1.0, 0.4]));
        assert_eq!(g[(0, 0)], 0.0);
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_basis(&ToricModel::cp1(), &p(&[0.3])).ncols(), 0);
        let k = kernel_basis(&ToricModel::augmented_cp1(), &p(&[0.5]));
        let want = [2.0 / 13f64.sqrt(), -3.0 / 13f64.sqrt()];
        let sign = k[(0, 0)].signum();
        assert!((k[(0, 0)] * sign - want[0]).abs() < 1e-15);
        assert!((k[(1, 0)] * sign - want[1]).abs() < 1e-15);
        let k = kernel_basis(&ToricModel::cp1_cp1(), &p(&[0.5, 0.0]));
        let sign = k[(0, 0)].signum();
        assert!((k[(0, 0)] * sign - 0.8).abs() < 1e-15);
        assert!((k[(1, 0)] * sign + 0.6).abs() < 1e-15);
    }

    #[test]
    fn cal_d_examples() {
        assert_eq!(cal_d(&ToricModel::cp1(), &p(&[0.2])).unwrap(), 1.0);
        let v = cal_d(&ToricModel::augmented_cp1(), &p(&[0.5])).unwrap();
        assert!((v - 1.0 / 13f64.sqrt()).abs() < 1e-15);
        let pp = ToricModel::cp1_cp1();
        for s1 in [0.1, 0.5, 0.77] {
            let v = cal_d(&pp, &p(&[s1, 0.0])).unwrap();
            let want = 2.0 * (s1 * (1.0 - s1)).sqrt() / (4.0 + (1.0 + s1) * (1.0 + s1)).sqrt();
            assert!((v - want).abs() < 1e-14);
        }
        assert!(matches!(
            cal_d(&ToricModel::augmented_cp1(), &p(&[0.0])),
            Err(LabError::DegenerateAt { .. })
        ));
    }

    #[test]
    fn normal_fraction_augmented_is_full() {
        let f = meridian_normal_fraction(&ToricModel::augmented_cp1(), &p(&[0.5]), 0).unwrap();
        assert!((f - 1.0).abs() < 1e-14);
    }
}
