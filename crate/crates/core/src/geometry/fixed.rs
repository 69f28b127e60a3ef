//! Fixed loci of the torus element `exp(s0)`, their lifts, and the
//! linearized return map.

use crate::error::{LabError, Result};
use crate::model::ToricModel;
use crate::special::{turns_off_lattice, wrap_pi};
use num_complex::Complex64;
use std::f64::consts::PI;

const LATTICE_TOL: f64 = 1e-9;

fn on_lattice(x: f64) -> bool {
    turns_off_lattice(x) < LATTICE_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorStatus {
    /// `s0_i in 2 pi Z`: the whole factor is fixed.
    InteriorFixed,
    /// Only the two poles are fixed.
    PoleOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pole {
    Bottom,
    Top,
}

impl Pole {
    pub fn value(self) -> f64 {
        match self {
            Pole::Bottom => 0.0,
            Pole::Top => 1.0,
        }
    }

    /// Rotation weight of the circle action on the tangent plane at the pole.
    pub fn weight(self) -> f64 {
        match self {
            Pole::Bottom => 1.0,
            Pole::Top => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedComponent {
    /// `None` for interior-fixed factors, the chosen pole otherwise.
    pub poles: Vec<Option<Pole>>,
    pub fixed_dim: usize,
    pub codim: usize,
    pub phase_ok: bool,
    /// Rotation angle on each pole factor's tangent plane, in factor order.
    pub rotation_angles: Vec<f64>,
}

impl FixedComponent {
    pub fn pole_values(&self) -> Vec<Option<f64>> {
        self.poles.iter().map(|p| p.map(Pole::value)).collect()
    }

    /// Whether the moment point `s` lies on this component.
    pub fn contains(&self, s: &[f64]) -> bool {
        self.poles.iter().zip(s).all(|(p, &si)| match p {
            None => true,
            Some(p) => (si - p.value()).abs() < 1e-12,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedLocusInfo {
    pub s0: Vec<f64>,
    pub factor_status: Vec<FactorStatus>,
    pub components: Vec<FixedComponent>,
    /// Bottom-pole rotation angle for each pole-only factor.
    pub rotation_angles: Vec<Option<f64>>,
}

impl FixedLocusInfo {
    pub fn is_period(&self) -> bool {
        self.components.iter().any(|c| c.phase_ok)
    }
}

pub fn fixed_locus(model: &ToricModel, s0: &[f64]) -> Result<FixedLocusInfo> {
    if s0.len() != model.r {
        return Err(LabError::DimensionMismatch { expected: model.r, got: s0.len() });
    }
    let factor_status: Vec<FactorStatus> = s0[..model.d]
        .iter()
        .map(|&x| if on_lattice(x) { FactorStatus::InteriorFixed } else { FactorStatus::PoleOnly })
        .collect();
    let pole_factors: Vec<usize> =
        (0..model.d).filter(|&i| factor_status[i] == FactorStatus::PoleOnly).collect();
    let constant_phase: f64 = model.constants().iter().zip(&s0[model.d..]).map(|(c, s)| c * s).sum();

    let mut components = Vec::with_capacity(1 << pole_factors.len());
    for mask in 0..(1usize << pole_factors.len()) {
        let mut poles = vec![None; model.d];
        let mut phase = constant_phase;
        let mut rotation_angles = Vec::with_capacity(pole_factors.len());
        for (bit, &i) in pole_factors.iter().enumerate() {
            // bit order: the first pole factor varies slowest
            let top = mask >> (pole_factors.len() - 1 - bit) & 1 == 1;
            let pole = if top { Pole::Top } else { Pole::Bottom };
            poles[i] = Some(pole);
            phase += s0[i] * (model.shifts()[i] as f64 + pole.value());
            rotation_angles.push(wrap_pi(-pole.weight() * s0[i]));
        }
        components.push(FixedComponent {
            poles,
            fixed_dim: model.d - pole_factors.len(),
            codim: pole_factors.len(),
            phase_ok: on_lattice(phase),
            rotation_angles,
        });
    }
    let rotation_angles = factor_status
        .iter()
        .zip(s0)
        .map(|(st, &x)| (*st == FactorStatus::PoleOnly).then(|| wrap_pi(-x)))
        .collect();
    Ok(FixedLocusInfo { s0: s0.to_vec(), factor_status, components, rotation_angles })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub angles: Vec<f64>,
    /// Complex determinant `prod (1 - e^{-i theta})`.
    pub poincare: Complex64,
    /// Real determinant of `I - A` on the normal bundle, equal to `|poincare|^2`.
    pub real_determinant: f64,
}

pub fn linearization(component: &FixedComponent) -> Result<Linearization> {
    if !component.phase_ok {
        return Err(LabError::NotAPeriod);
    }
    let poincare = poincare_factor(&component.rotation_angles);
    Ok(Linearization { angles: component.rotation_angles.clone(), poincare, real_determinant: poincare.norm_sqr() })
}

pub fn poincare_factor(angles: &[f64]) -> Complex64 {
    angles
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, &t| acc * (1.0 - Complex64::from_polar(1.0, -t)))
}

/// `psi2(v, w) = -i omega0(v, w) - |v - w|^2 / 2` with interleaved `(x1, y1, x2, y2, ...)` coordinates.
pub fn psi2(v: &[f64], w: &[f64]) -> Result<Complex64> {
    if v.len() != w.len() {
        return Err(LabError::DimensionMismatch { expected: v.len(), got: w.len() });
    }
    if !v.len().is_multiple_of(2) {
        return Err(LabError::DimensionMismatch { expected: v.len() + 1, got: v.len() });
    }
    let mut omega = 0.0;
    let mut dist2 = 0.0;
    for (vb, wb) in v.chunks(2).zip(w.chunks(2)) {
        omega += vb[0] * wb[1] - vb[1] * wb[0];
        dist2 += (vb[0] - wb[0]).powi(2) + (vb[1] - wb[1]).powi(2);
    }
    Ok(Complex64::new(-0.5 * dist2, -omega))
}

/// Applies the block rotation by `angles` to an interleaved tangent vector.
pub fn apply_rotation(angles: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    if w.len() != 2 * angles.len() {
        return Err(LabError::DimensionMismatch { expected: 2 * angles.len(), got: w.len() });
    }
    let mut out = Vec::with_capacity(w.len());
    for (&t, b) in angles.iter().zip(w.chunks(2)) {
        let (sn, cs) = t.sin_cos();
        out.push(cs * b[0] - sn * b[1]);
        out.push(sn * b[0] + cs * b[1]);
    }
    Ok(out)
}

/// Distance from `s0` to the nearest piece of the period set that does not
/// pass through `s0` itself.
pub fn nearest_other_period(model: &ToricModel, s0: &[f64]) -> Result<f64> {
    if s0.len() != model.r {
        return Err(LabError::DimensionMismatch { expected: model.r, got: s0.len() });
    }
    let tau = 2.0 * PI;
    let mut best = f64::INFINITY;
    // each factor: 0 interior, 1 bottom pole, 2 top pole
    let patterns = 3usize.pow(model.d as u32);
    for pat in 0..patterns {
        let mut code = pat;
        let mut interior = Vec::new();
        let mut u = vec![0.0; model.r];
        for i in 0..model.d {
            match code % 3 {
                0 => interior.push(i),
                c => u[i] = model.shifts()[i] as f64 + (c - 1) as f64,
            }
            code /= 3;
        }
        for (j, &c) in model.constants().iter().enumerate() {
            u[model.d + j] = c;
        }
        let u2: f64 = u.iter().map(|x| x * x).sum();
        let proj: f64 = u.iter().zip(s0).map(|(a, b)| a * b).sum();
        let m_choices = 3usize.pow(interior.len() as u32);
        for mc in 0..m_choices {
            let mut code = mc;
            let mut d2 = 0.0;
            for &i in &interior {
                let m = (s0[i] / tau).round() + (code % 3) as f64 - 1.0;
                code /= 3;
                d2 += (s0[i] - tau * m).powi(2);
            }
            let candidates: Vec<f64> = if u2 > 0.0 {
                let m0 = (proj / tau).round();
                (-1..=1).map(|k| d2 + (proj - tau * (m0 + k as f64)).powi(2) / u2).collect()
            } else {
                vec![d2]
            };
            for c in candidates {
                let dist = c.sqrt();
                if dist > 1e-9 {
                    best = best.min(dist);
                }
            }
        }
    }
    Ok(best)
}
