use super::{complement_basis, kernel_basis, kernel_gram, moment_vector, DEGENERACY_TOL};
use crate::error::{LabError, Result};
use crate::model::{PointM, ToricModel};
use nalgebra::DMatrix;

const LOCUS_TOL: f64 = 1e-12;
const SEGMENT_SAMPLES: usize = 65;

/// `M_beta` in moment coordinates: the points with `Phi(s) = t * beta`, `t > 0`.
/// Since `Phi` is affine, the locus is `s_i = t beta_i - a_i` over a `t`-range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RayLocus {
    Empty,
    Point { t: f64 },
    Segment { t0: f64, t1: f64 },
}

impl RayLocus {
    pub fn solve(model: &ToricModel, beta: &[f64]) -> Self {
        Self::solve_with_poles(model, beta, &vec![None; model.d])
    }

    /// Restricts factors with `Some(p)` to the pole value `s_i = p`.
    pub fn solve_with_poles(model: &ToricModel, beta: &[f64], poles: &[Option<f64>]) -> Self {
        let mut lo = 0.0_f64;
        let mut hi = f64::INFINITY;
        let pin = |t: f64, lo: &mut f64, hi: &mut f64| {
            *lo = lo.max(t);
            *hi = hi.min(t);
        };
        for (j, &c) in model.constants().iter().enumerate() {
            let b = beta[model.d + j];
            if b <= 0.0 {
                return Self::Empty;
            }
            let t = c / b;
            if t < lo - LOCUS_TOL * t.max(1.0) || t > hi + LOCUS_TOL * t.max(1.0) {
                return Self::Empty;
            }
            pin(t, &mut lo, &mut hi);
        }
        for (i, &a) in model.shifts().iter().enumerate() {
            let b = beta[i];
            if b <= 0.0 {
                return Self::Empty;
            }
            let a = a as f64;
            match poles[i] {
                Some(p) => {
                    let t = (a + p) / b;
                    if t < lo - LOCUS_TOL * t.max(1.0) || t > hi + LOCUS_TOL * t.max(1.0) {
                        return Self::Empty;
                    }
                    pin(t, &mut lo, &mut hi);
                }
                None => {
                    lo = lo.max(a / b);
                    hi = hi.min((a + 1.0) / b);
                }
            }
        }
        let scale = hi.abs().max(1.0);
        if lo > hi + LOCUS_TOL * scale {
            Self::Empty
        } else if hi - lo <= LOCUS_TOL * scale {
            Self::Point { t: 0.5 * (lo + hi) }
        } else {
            Self::Segment { t0: lo, t1: hi }
        }
    }

    /// Point of the locus at parameter `t`, clamped into the cube.
    pub fn point_at(model: &ToricModel, beta: &[f64], t: f64) -> PointM {
        let s = model
            .shifts()
            .iter()
            .zip(beta)
            .map(|(&a, &b)| (t * b - a as f64).clamp(0.0, 1.0))
            .collect();
        PointM { s }
    }

    /// Uniformly spaced parameters covering the locus, endpoints included.
    pub fn sample_parameters(&self, n: usize) -> Vec<f64> {
        match *self {
            Self::Empty => vec![],
            Self::Point { t } => vec![t],
            Self::Segment { t0, t1 } => {
                let n = n.max(2);
                (0..n).map(|j| t0 + (t1 - t0) * j as f64 / (n - 1) as f64).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransversalityReport {
    pub transverse: bool,
    /// Smallest singular value of the action restricted to ker Φ(m), minimized over samples.
    pub margin: f64,
    /// Whether `beta` is a regular value of `Phi/|Phi|` at every sample.
    pub regular_value: bool,
    pub witnesses: Vec<PointM>,
}

pub fn check_transversality(model: &ToricModel, beta: &[f64]) -> Result<TransversalityReport> {
    if beta.len() != model.r {
        return Err(LabError::DimensionMismatch { expected: model.r, got: beta.len() });
    }
    let locus = RayLocus::solve(model, beta);
    if locus == RayLocus::Empty {
        return Err(LabError::EmptyLocus);
    }
    let mut margin = f64::INFINITY;
    let mut regular_value = true;
    let mut witnesses = Vec::new();
    for t in locus.sample_parameters(SEGMENT_SAMPLES) {
        let point = RayLocus::point_at(model, beta, t);
        let basis = kernel_basis(model, &point);
        if basis.ncols() > 0 {
            let gram = kernel_gram(model, &point.s, &basis);
            let lmin = gram.symmetric_eigenvalues().min();
            margin = margin.min(lmin.max(0.0).sqrt());
        }
        regular_value &= differential_rank(model, &point) + 1 >= model.r;
        witnesses.push(point);
    }
    Ok(TransversalityReport { transverse: margin > DEGENERACY_TOL, margin, regular_value, witnesses })
}

/// Rank of `d(Phi/|Phi|)`: the projection of the moment image directions onto `Phi^perp`.
fn differential_rank(model: &ToricModel, point: &PointM) -> usize {
    let phi = moment_vector(model, &point.s);
    let perp = complement_basis(&phi);
    if perp.ncols() == 0 {
        return 0;
    }
    let free: Vec<usize> = (0..model.d).filter(|&i| point.s[i] > 0.0 && point.s[i] < 1.0).collect();
    if free.is_empty() {
        return 0;
    }
    let mut image = DMatrix::zeros(perp.ncols(), free.len());
    for (col, &i) in free.iter().enumerate() {
        for row in 0..perp.ncols() {
            image[(row, col)] = perp[(i, row)];
        }
    }
    image.singular_values().iter().filter(|&&v| v > DEGENERACY_TOL).count()
}
