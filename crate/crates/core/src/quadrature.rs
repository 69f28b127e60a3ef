//! One-dimensional quadrature rules.

use crate::error::{LabError, Result};
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels.
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(mid + 0.5 * h * xi);
                weights.push(0.5 * h * wi);
            }
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Composite Simpson with interval doubling until the relative change drops
/// below `rel_tol`.
pub fn simpson_doubling(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    let mut n = 2usize;
    let h = (b - a) / n as f64;
    let ends = f(a) + f(b);
    let mut odd = f(a + h);
    let mut even = 0.0;
    let mut prev = (ends + 4.0 * odd + 2.0 * even) * h / 3.0;
    for _ in 0..24 {
        n *= 2;
        let h = (b - a) / n as f64;
        even += odd;
        odd = (0..n / 2).map(|j| f(a + (2 * j + 1) as f64 * h)).sum();
        let cur = (ends + 4.0 * odd + 2.0 * even) * h / 3.0;
        if n >= 16 && ((cur - prev).abs() <= rel_tol * cur.abs() || cur == prev) {
            return Ok(cur);
        }
        prev = cur;
        if !cur.is_finite() {
            break;
        }
    }
    Err(LabError::InvalidArgument(format!("Simpson refinement did not converge (last value {prev})")))
}
