//! Exact toric models: products of projective lines with integer interval
//! shifts, plus optional constant Hamiltonians.
//!
//! Each factor carries symplectic area `pi`, so its moment interval is
//! `[a_i, a_i + 1]` and the level-`l` Szegő diagonal equals `((l+1)/pi)^n`.

use crate::error::{LabError, Result};
use crate::special::ln_binomial_pmf;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentPolytope {
    pub shifts: Vec<u64>,
    pub constants: Vec<f64>,
}

impl MomentPolytope {
    pub fn n_factors(&self) -> usize {
        self.shifts.len()
    }

    /// Distance from the origin to the polytope; the corner `(a, c)` is closest.
    pub fn distance_to_origin(&self) -> f64 {
        let a2: f64 = self.shifts.iter().map(|&a| (a * a) as f64).sum();
        let c2: f64 = self.constants.iter().map(|c| c * c).sum();
        (a2 + c2).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToricModel {
    pub polytope: MomentPolytope,
    pub d: usize,
    pub r: usize,
}

/// A point of the model in moment coordinates `s in [0,1]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointM {
    pub s: Vec<f64>,
}

impl PointM {
    pub fn new(s: Vec<f64>) -> Result<Self> {
        if let Some(x) = s.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(LabError::InvalidArgument(format!("moment coordinate {x} outside [0,1]")));
        }
        Ok(Self { s })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPoint {
    pub level: u64,
    pub offsets: Vec<u64>,
    pub eigenvalue: Vec<f64>,
}

impl ToricModel {
    /// Builds and validates a model (`build_model`).
    pub fn new(shifts: &[i64], constants: &[f64]) -> Result<Self> {
        if shifts.is_empty() {
            return Err(LabError::InvalidPolytope("at least one projective-line factor is required".into()));
        }
        if let Some(a) = shifts.iter().find(|&&a| a < 1) {
            return Err(LabError::InvalidPolytope(format!("shift {a} < 1")));
        }
        if let Some(c) = constants.iter().find(|&&c| !(c > 0.0 && c.is_finite())) {
            return Err(LabError::InvalidPolytope(format!("constant {c} is not a positive real")));
        }
        let polytope = MomentPolytope {
            shifts: shifts.iter().map(|&a| a as u64).collect(),
            constants: constants.to_vec(),
        };
        let d = shifts.len();
        Ok(Self { r: d + constants.len(), d, polytope })
    }

    pub fn cp1() -> Self {
        Self::new(&[1], &[]).unwrap()
    }

    pub fn augmented_cp1() -> Self {
        Self::new(&[1], &[1.0]).unwrap()
    }

    pub fn cp1_cp1() -> Self {
        Self::new(&[1, 2], &[]).unwrap()
    }

    pub fn n_factors(&self) -> usize {
        self.d
    }

    pub fn shifts(&self) -> &[u64] {
        &self.polytope.shifts
    }

    pub fn constants(&self) -> &[f64] {
        &self.polytope.constants
    }

    pub fn joint_eigenvalue(&self, level: u64, offsets: &[u64]) -> Result<Vec<f64>> {
        self.check_offsets(level, offsets)?;
        Ok(self.eigenvalue_unchecked(level, offsets))
    }

    pub(crate) fn eigenvalue_unchecked(&self, level: u64, offsets: &[u64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.r);
        self.write_eigenvalue(level, offsets, &mut out);
        out
    }

    pub(crate) fn write_eigenvalue(&self, level: u64, offsets: &[u64], out: &mut Vec<f64>) {
        out.clear();
        for (k, a) in offsets.iter().zip(self.shifts()) {
            out.push((k + level * a) as f64);
        }
        for c in self.constants() {
            out.push(level as f64 * c);
        }
    }

    fn check_offsets(&self, level: u64, offsets: &[u64]) -> Result<()> {
        if offsets.len() != self.d {
            return Err(LabError::DimensionMismatch { expected: self.d, got: offsets.len() });
        }
        if let Some(k) = offsets.iter().find(|&&k| k > level) {
            return Err(LabError::OutOfRange(format!("offset {k} exceeds level {level}")));
        }
        Ok(())
    }

    fn check_point(&self, point: &PointM) -> Result<()> {
        if point.s.len() != self.d {
            return Err(LabError::DimensionMismatch { expected: self.d, got: point.s.len() });
        }
        Ok(())
    }

    /// Euclidean distance from `center` to the dilated polytope `level * P`.
    pub fn level_distance(&self, center: &[f64], level: u64) -> f64 {
        let l = level as f64;
        let mut d2 = 0.0;
        for (i, &a) in self.shifts().iter().enumerate() {
            let lo = l * a as f64;
            let hi = lo + l;
            let x = center[i];
            let e = if x < lo { lo - x } else if x > hi { x - hi } else { 0.0 };
            d2 += e * e;
        }
        for (j, &c) in self.constants().iter().enumerate() {
            let e = center[self.d + j] - l * c;
            d2 += e * e;
        }
        d2.sqrt()
    }

    /// Inclusive range of levels whose dilated polytope meets the closed ball.
    pub fn level_range(&self, center: &[f64], radius: f64) -> Option<(u64, u64)> {
        let mut lo = 0.0_f64;
        let mut hi = f64::INFINITY;
        for (i, &a) in self.shifts().iter().enumerate() {
            lo = lo.max((center[i] - radius) / (a + 1) as f64);
            hi = hi.min((center[i] + radius) / a as f64);
        }
        for (j, &c) in self.constants().iter().enumerate() {
            lo = lo.max((center[self.d + j] - radius) / c);
            hi = hi.min((center[self.d + j] + radius) / c);
        }
        if hi < 0.0 || lo > hi + 1.0 {
            return None;
        }
        let mut first = lo.floor().max(0.0) as u64;
        let mut last = hi.ceil().max(0.0) as u64;
        while first <= last && self.level_distance(center, first) > radius {
            first += 1;
        }
        while last >= first && self.level_distance(center, last) > radius {
            if last == 0 {
                return None;
            }
            last -= 1;
        }
        (first <= last).then_some((first, last))
    }

    /// Calls `f(offsets, eigenvalue)` for every lattice point of level `level`
    /// with `|eigenvalue - center| <= radius`, offsets in lexicographic order.
    pub fn for_each_in_ball(&self, level: u64, center: &[f64], radius: f64, mut f: impl FnMut(&[u64], &[f64])) {
        let mut base2 = 0.0;
        for (j, &c) in self.constants().iter().enumerate() {
            let e = center[self.d + j] - level as f64 * c;
            base2 += e * e;
        }
        if base2.sqrt() > radius {
            return;
        }
        let mut offsets = vec![0u64; self.d];
        let mut lam = self.eigenvalue_unchecked(level, &offsets);
        self.recurse_ball(0, level, center, radius, base2, &mut offsets, &mut lam, &mut f);
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse_ball(
        &self,
        i: usize,
        level: u64,
        center: &[f64],
        radius: f64,
        partial2: f64,
        offsets: &mut Vec<u64>,
        lam: &mut Vec<f64>,
        f: &mut impl FnMut(&[u64], &[f64]),
    ) {
        if i == self.d {
            if self.ball_distance(center, lam) <= radius {
                f(offsets, lam);
            }
            return;
        }
        let rem = (radius * radius - partial2).max(0.0).sqrt();
        let origin = (level * self.shifts()[i]) as f64;
        let lo = (center[i] - origin - rem).floor() - 1.0;
        let hi = (center[i] - origin + rem).ceil() + 1.0;
        let k_lo = lo.max(0.0) as u64;
        let k_hi = hi.min(level as f64);
        if k_hi < 0.0 {
            return;
        }
        for k in k_lo..=(k_hi as u64) {
            offsets[i] = k;
            lam[i] = origin + k as f64;
            let e = center[i] - lam[i];
            let p2 = partial2 + e * e;
            if p2.sqrt() > radius * (1.0 + 1e-15) + 1e-300 {
                continue;
            }
            self.recurse_ball(i + 1, level, center, radius, p2, offsets, lam, f);
        }
    }

    /// The membership metric: factors first, then constants, summed in order.
    fn ball_distance(&self, center: &[f64], lam: &[f64]) -> f64 {
        lam.iter().zip(center).map(|(x, c)| (c - x) * (c - x)).sum::<f64>().sqrt()
    }

    /// All spectral points within `radius` of `center`, sorted lexicographically by eigenvalue.
    pub fn enumerate_spectrum(&self, center: &[f64], radius: f64) -> Result<Vec<SpectralPoint>> {
        if center.len() != self.r {
            return Err(LabError::DimensionMismatch { expected: self.r, got: center.len() });
        }
        if !(radius > 0.0) {
            return Err(LabError::InvalidArgument(format!("radius {radius} must be positive")));
        }
        Ok(self.collect_ball(center, radius))
    }

    pub(crate) fn collect_ball(&self, center: &[f64], radius: f64) -> Vec<SpectralPoint> {
        let mut out = Vec::new();
        if let Some((lo, hi)) = self.level_range(center, radius) {
            for level in lo..=hi {
                self.for_each_in_ball(level, center, radius, |k, lam| {
                    out.push(SpectralPoint { level, offsets: k.to_vec(), eigenvalue: lam.to_vec() });
                });
            }
        }
        out.sort_by(spectral_order);
        out
    }

    /// `ln rho_{l,k}(s)`; `-inf` where the amplitude vanishes exactly.
    pub fn ln_diagonal_amplitude(&self, level: u64, offsets: &[u64], point: &PointM) -> Result<f64> {
        self.check_offsets(level, offsets)?;
        self.check_point(point)?;
        Ok(self.ln_amplitude_unchecked(level, offsets, &point.s))
    }

    pub(crate) fn ln_amplitude_unchecked(&self, level: u64, offsets: &[u64], s: &[f64]) -> f64 {
        let ln_norm = ((level + 1) as f64 / PI).ln();
        offsets
            .iter()
            .zip(s)
            .map(|(&k, &si)| ln_norm + ln_binomial_pmf(k, level, si))
            .sum()
    }

    pub fn diagonal_amplitude(&self, level: u64, offsets: &[u64], point: &PointM) -> Result<f64> {
        Ok(self.ln_diagonal_amplitude(level, offsets, point)?.exp())
    }

    /// Closed form `((l+1)/pi)^n`.
    pub fn level_diagonal_sum(&self, level: u64) -> f64 {
        ((level + 1) as f64 / PI).powi(self.d as i32)
    }

    /// Brute-force sum of `diagonal_amplitude` over every offset vector of the level.
    pub fn level_diagonal_sum_brute(&self, level: u64, point: &PointM) -> Result<f64> {
        self.check_point(point)?;
        let mut offsets = vec![0u64; self.d];
        let mut acc = NeumaierSum::default();
        loop {
            acc.add(self.ln_amplitude_unchecked(level, &offsets, &point.s).exp());
            let mut i = self.d;
            loop {
                if i == 0 {
                    return Ok(acc.total());
                }
                i -= 1;
                if offsets[i] < level {
                    offsets[i] += 1;
                    break;
                }
                offsets[i] = 0;
            }
        }
    }

    /// Moves `factor` along its meridian by Riemannian arclength `h`.
    pub fn meridian_point(&self, factor: usize, base: &PointM, h: f64) -> Result<PointM> {
        self.check_point(base)?;
        if factor >= self.d {
            return Err(LabError::InvalidArgument(format!("factor {factor} out of range")));
        }
        if h == 0.0 {
            return Ok(base.clone());
        }
        let s = base.s[factor];
        let theta = s.sqrt().asin() + h;
        let slack = 1e-14;
        if theta < -slack || theta > FRAC_PI_2 + slack {
            return Err(LabError::OutOfChart { factor, s, h });
        }
        let theta = theta.clamp(0.0, FRAC_PI_2);
        let mut out = base.clone();
        out.s[factor] = if theta == FRAC_PI_2 { 1.0 } else { theta.sin().powi(2) };
        Ok(out)
    }

    /// Number of spectral points with `|Lambda| <= radius`, multiplicity included.
    pub fn count_eigenvalues(&self, radius: f64) -> u64 {
        let center = vec![0.0; self.r];
        let Some((lo, hi)) = self.level_range(&center, radius) else {
            return 0;
        };
        let mut total = 0u64;
        for level in lo..=hi {
            let mut base2 = 0.0;
            for &c in self.constants() {
                let e = level as f64 * c;
                base2 += e * e;
            }
            if base2.sqrt() > radius {
                continue;
            }
            total += self.count_recurse(0, level, radius, base2);
        }
        total
    }

    fn count_recurse(&self, i: usize, level: u64, radius: f64, partial2: f64) -> u64 {
        let origin = level * self.shifts()[i];
        let inside = |k: u64| (partial2 + ((origin + k) as f64).powi(2)).sqrt() <= radius;
        if i + 1 == self.d {
            // eigenvalue components are nonnegative, so membership is monotone in k
            if !inside(0) {
                return 0;
            }
            let rem = (radius * radius - partial2).max(0.0).sqrt();
            let mut k = ((rem - origin as f64).floor().max(0.0) as u64).min(level);
            while k < level && inside(k + 1) {
                k += 1;
            }
            while k > 0 && !inside(k) {
                k -= 1;
            }
            return k + 1;
        }
        let mut total = 0;
        for k in 0..=level {
            if !inside(k) {
                break;
            }
            let x = (origin + k) as f64;
            total += self.count_recurse(i + 1, level, radius, partial2 + x * x);
        }
        total
    }
}

/// Lexicographic order on eigenvalues, ties broken by level then offsets.
pub fn spectral_order(a: &SpectralPoint, b: &SpectralPoint) -> Ordering {
    for (x, y) in a.eigenvalue.iter().zip(&b.eigenvalue) {
        match x.partial_cmp(y).unwrap_or(Ordering::Equal) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    a.level.cmp(&b.level).then_with(|| a.offsets.cmp(&b.offsets))
}

#[derive(Default)]
pub(crate) struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}
