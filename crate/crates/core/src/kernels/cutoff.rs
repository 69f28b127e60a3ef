use crate::error::{LabError, Result};
use crate::quadrature::CompositeRule;
use crate::special::chi_square_tail;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Cutoff family. `chi` is the weight on the group side; `hat` its Fourier
/// transform under `hat(xi) = int chi(s) e^{-i<xi,s>} ds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CutoffKind {
    Gaussian { sigma: f64 },
    Bump { epsilon: f64 },
}

#[derive(Debug, Clone)]
pub struct Cutoff {
    kind: CutoffKind,
    dim: usize,
    table: Option<Arc<BumpTable>>,
}

impl PartialEq for Cutoff {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.dim == other.dim
    }
}

/// Power of the polynomial envelope used for the bump transform.
pub const BUMP_ENVELOPE_POWER: i32 = 12;

impl Cutoff {
    pub fn new(kind: CutoffKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::InvalidArgument("cutoff dimension must be positive".into()));
        }
        match kind {
            CutoffKind::Gaussian { sigma } if sigma > 0.0 && sigma.is_finite() => {
                Ok(Self { kind, dim, table: None })
            }
            CutoffKind::Bump { epsilon } if epsilon > 0.0 && epsilon.is_finite() => {
                Ok(Self { kind, dim, table: Some(Arc::new(BumpTable::build(epsilon, dim))) })
            }
            _ => Err(LabError::InvalidArgument(format!("cutoff width must be positive: {kind:?}"))),
        }
    }

    pub fn gaussian(sigma: f64, dim: usize) -> Result<Self> {
        Self::new(CutoffKind::Gaussian { sigma }, dim)
    }

    pub fn bump(epsilon: f64, dim: usize) -> Result<Self> {
        Self::new(CutoffKind::Bump { epsilon }, dim)
    }

    pub fn kind(&self) -> CutoffKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn chi(&self, s: &[f64]) -> f64 {
        let r2: f64 = s.iter().map(|x| x * x).sum();
        match self.kind {
            CutoffKind::Gaussian { sigma } => (-r2 / (2.0 * sigma * sigma)).exp(),
            CutoffKind::Bump { epsilon } => bump_profile(r2.sqrt() / epsilon),
        }
    }

    pub fn chi_at_origin(&self) -> f64 {
        match self.kind {
            CutoffKind::Gaussian { .. } => 1.0,
            CutoffKind::Bump { .. } => (-1.0f64).exp(),
        }
    }

    pub fn hat(&self, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.dim {
            return Err(LabError::DimensionMismatch { expected: self.dim, got: xi.len() });
        }
        Ok(self.hat_radial(xi.iter().map(|x| x * x).sum::<f64>().sqrt()))
    }

    /// `hat` as a function of `|xi|`.
    pub fn hat_radial(&self, k: f64) -> f64 {
        match self.kind {
            CutoffKind::Gaussian { sigma } => (self.ln_gaussian_peak() - 0.5 * sigma * sigma * k * k).exp(),
            CutoffKind::Bump { .. } => self.table.as_ref().expect("bump table").eval(k),
        }
    }

    /// `(ln |hat|, hat < 0)` at radius `k`.
    pub(crate) fn ln_abs_hat_radial(&self, k: f64) -> (f64, bool) {
        match self.kind {
            CutoffKind::Gaussian { sigma } => (self.ln_gaussian_peak() - 0.5 * sigma * sigma * k * k, false),
            CutoffKind::Bump { .. } => {
                let v = self.table.as_ref().expect("bump table").eval(k);
                (v.abs().ln(), v < 0.0)
            }
        }
    }

    fn ln_gaussian_peak(&self) -> f64 {
        match self.kind {
            CutoffKind::Gaussian { sigma } => self.dim as f64 * (sigma * (2.0 * PI).sqrt()).ln(),
            CutoffKind::Bump { .. } => unreachable!(),
        }
    }

    /// `ln sup_{|xi| >= d} |hat(xi)|`.
    pub fn ln_envelope(&self, d: f64) -> f64 {
        match self.kind {
            CutoffKind::Gaussian { sigma } => {
                let d = d.max(0.0);
                self.ln_gaussian_peak() - 0.5 * sigma * sigma * d * d
            }
            CutoffKind::Bump { .. } => self.table.as_ref().expect("bump table").ln_envelope(d),
        }
    }

    /// Radius beyond which `|hat|` stays below `tol`.
    pub fn tail_radius(&self, tol: f64) -> Result<f64> {
        if !(tol > 0.0 && tol <= 1e-2) {
            return Err(LabError::InvalidArgument(format!("tolerance {tol} outside (0, 1e-2]")));
        }
        Ok(self.radius_for_ln_level(tol.ln()))
    }

    pub(crate) fn radius_for_ln_level(&self, ln_tol: f64) -> f64 {
        match self.kind {
            CutoffKind::Gaussian { sigma } => {
                let gap = self.ln_gaussian_peak() - ln_tol;
                if gap <= 0.0 {
                    0.0
                } else {
                    (2.0 * gap).sqrt() / sigma
                }
            }
            CutoffKind::Bump { .. } => {
                let t = self.table.as_ref().expect("bump table");
                ((t.ln_cp - ln_tol) / BUMP_ENVELOPE_POWER as f64).exp()
            }
        }
    }

    /// Largest radius at which `hat` is known; sums never reach further.
    pub fn max_radius(&self) -> f64 {
        match &self.table {
            None => f64::INFINITY,
            Some(t) => t.k_max(),
        }
    }

    /// Tabulated `C_p` for the bump envelope `|hat(xi)| <= C_p |xi|^{-p}`, `p = BUMP_ENVELOPE_POWER`.
    pub fn envelope_constant(&self) -> Option<f64> {
        self.table.as_ref().map(|t| t.ln_cp.exp())
    }

    /// Bound on `sum_{m >= start} env(delta0 m - c) w_m` with `w_m = (m+1)^n scale`,
    /// valid when `delta0 * start >= 2 c` and `delta0 * start - c` exceeds every
    /// radius in play. Returns `+inf` when no closed form applies yet.
    pub(crate) fn ln_level_tail(&self, start: u64, n: usize, delta0: f64, c: f64, ln_scale: f64) -> f64 {
        let nf = n as f64;
        let l = start as f64;
        match self.kind {
            CutoffKind::Gaussian { .. } => {
                let g = |m: f64| self.ln_envelope(delta0 * m - c) + nf * (m + 1.0).ln() + ln_scale;
                let (g0, g1) = (g(l), g(l + 1.0));
                let ln_q = g1 - g0;
                if ln_q >= 0.0 {
                    return f64::INFINITY;
                }
                g0 - (-(ln_q.exp_m1())).ln()
            }
            CutoffKind::Bump { .. } => {
                if n + 2 >= BUMP_ENVELOPE_POWER as usize || start < 2 {
                    return f64::INFINITY;
                }
                let t = self.table.as_ref().expect("bump table");
                let p = BUMP_ENVELOPE_POWER as f64;
                // env(delta0 m - c) <= C_p (2/(delta0 m))^p and (m+1)^n <= (2m)^n
                t.ln_cp + p * (2.0 / delta0).ln() + nf * 2f64.ln() + ln_scale + (nf + 1.0 - p) * (l - 1.0).ln()
                    - (p - 1.0 - nf).ln()
            }
        }
    }

    /// Fraction of the mass of `chi` outside the ball of the given radius.
    pub fn mass_beyond(&self, radius: f64) -> f64 {
        match self.kind {
            CutoffKind::Gaussian { sigma } => chi_square_tail(self.dim, radius * radius / (2.0 * sigma * sigma)),
            CutoffKind::Bump { epsilon } => {
                if radius >= epsilon {
                    return 0.0;
                }
                let m = self.dim as i32 - 1;
                let radial = |x: f64| x.powi(m) * bump_profile(x / epsilon);
                let outer = CompositeRule::new(radius.max(0.0), epsilon, 64, 16).integrate(radial);
                let total = CompositeRule::new(0.0, epsilon, 64, 16).integrate(radial);
                outer / total
            }
        }
    }
}

/// `exp(-1/(1-x^2))` on `|x| < 1`, zero outside.
pub(crate) fn bump_profile(x: f64) -> f64 {
    let q = 1.0 - x * x;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

fn sphere_area(m: usize) -> f64 {
    // area of the unit sphere S^m in R^{m+1}
    let a = (m + 1) as f64 / 2.0;
    2.0 * PI.powf(a) / gamma_half_integer(a)
}

fn gamma_half_integer(a: f64) -> f64 {
    // a is a positive multiple of 1/2
    let mut g = if (a - a.floor()).abs() > 0.25 { PI.sqrt() } else { 1.0 };
    let mut x = if (a - a.floor()).abs() > 0.25 { 0.5 } else { 1.0 };
    while x < a - 0.25 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Radial table of the bump transform on a uniform grid with cubic
/// interpolation, plus the suffix maxima used as a decreasing envelope.
#[derive(Debug)]
struct BumpTable {
    step: f64,
    values: Vec<f64>,
    suffix_max: Vec<f64>,
    ln_cp: f64,
}

impl BumpTable {
    fn build(epsilon: f64, dim: usize) -> Self {
        let outer = CompositeRule::new(0.0, epsilon, 96, 16);
        // Abel projection P(t) = int chi(sqrt(t^2+|y|^2)) dy over R^{dim-1}
        let projection: Vec<f64> = outer
            .nodes
            .iter()
            .map(|&t| {
                if dim == 1 {
                    return bump_profile(t / epsilon);
                }
                let umax = (epsilon * epsilon - t * t).max(0.0).sqrt();
                let inner = CompositeRule::new(0.0, umax, 48, 16);
                let m = dim as i32 - 2;
                sphere_area(dim - 2)
                    * inner.integrate(|u| bump_profile((t * t + u * u).sqrt() / epsilon) * u.powi(m))
            })
            .collect();
        let weights: Vec<f64> = outer.weights.iter().zip(&projection).map(|(w, p)| 2.0 * w * p).collect();
        let abs_mass: f64 = weights.iter().map(|w| w.abs()).sum();
        let step = 0.01 / epsilon;
        let eval = |k: f64| -> f64 { outer.nodes.iter().zip(&weights).map(|(&t, &w)| w * (k * t).cos()).sum() };

        // extend in chunks until the transform sits at the quadrature noise floor
        let chunk = 2048;
        let floor = 64.0 * f64::EPSILON * abs_mass;
        let mut values: Vec<f64> = Vec::new();
        loop {
            let start = values.len();
            let block: Vec<f64> = (start..start + chunk).into_par_iter().map(|j| eval(j as f64 * step)).collect();
            let quiet = block.iter().all(|v| v.abs() < floor);
            values.extend(block);
            let k_eps = values.len() as f64 * step * epsilon;
            if (quiet && k_eps > 64.0) || k_eps > 4000.0 {
                break;
            }
        }
        // cut at the first point where the transform drops under the floor for good
        let mut last = values.len() - 1;
        while last > 0 && values[last].abs() < floor {
            last -= 1;
        }
        values.truncate(last + 2);
        let mut suffix_max = vec![0.0; values.len()];
        let mut running: f64 = 0.0;
        for j in (0..values.len()).rev() {
            running = running.max(values[j].abs());
            suffix_max[j] = running;
        }
        let p = BUMP_ENVELOPE_POWER;
        let ln_cp = values
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, v)| p as f64 * (j as f64 * step).ln() + v.abs().ln())
            .fold(f64::NEG_INFINITY, f64::max);
        Self { step, values, suffix_max, ln_cp }
    }

    fn k_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    fn eval(&self, k: f64) -> f64 {
        let x = k / self.step;
        let n = self.values.len();
        if x >= (n - 1) as f64 {
            return 0.0;
        }
        let j = x.floor() as usize;
        let f = |i: isize| -> f64 {
            // the transform is even in k
            self.values[i.unsigned_abs().min(n - 1)]
        };
        let t = x - j as f64;
        let (p0, p1, p2, p3) = (f(j as isize - 1), f(j as isize), f(j as isize + 1), f(j as isize + 2));
        // four-point Lagrange interpolation on nodes -1, 0, 1, 2
        -p0 * t * (t - 1.0) * (t - 2.0) / 6.0 + p1 * (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
            - p2 * (t + 1.0) * t * (t - 2.0) / 2.0
            + p3 * (t + 1.0) * t * (t - 1.0) / 6.0
    }

    fn ln_envelope(&self, d: f64) -> f64 {
        let beyond = self.ln_cp - BUMP_ENVELOPE_POWER as f64 * d.max(self.k_max()).ln();
        let j = (d.max(0.0) / self.step).floor() as usize;
        if j >= self.values.len() {
            return beyond;
        }
        // interpolation can overshoot the nodes slightly; the 1% pad covers it
        (self.suffix_max[j] * 1.01).ln().max(beyond)
    }
}
