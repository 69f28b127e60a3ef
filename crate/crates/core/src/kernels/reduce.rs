//! Fixed-order pairwise reductions on log-scaled complex numbers.

use num_complex::Complex64;

/// `mantissa * exp(ln_scale)`; keeps sums representable far below `f64::MIN_POSITIVE`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledComplex {
    pub mantissa: Complex64,
    pub ln_scale: f64,
}

impl ScaledComplex {
    pub const ZERO: Self = Self { mantissa: Complex64::new(0.0, 0.0), ln_scale: f64::NEG_INFINITY };

    pub fn new(mantissa: Complex64, ln_scale: f64) -> Self {
        Self { mantissa, ln_scale }.normalized()
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self::new(z, 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == Complex64::new(0.0, 0.0) || self.ln_scale == f64::NEG_INFINITY
    }

    /// Plain value; underflows to zero when `ln_abs` is very negative.
    pub fn to_complex(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        self.mantissa * self.ln_scale.exp()
    }

    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.mantissa.norm().ln() + self.ln_scale
    }

    pub fn scale_by_phase(&self, phase: f64) -> Self {
        Self { mantissa: self.mantissa * Complex64::from_polar(1.0, phase), ln_scale: self.ln_scale }
    }

    fn normalized(self) -> Self {
        let m = self.mantissa.norm();
        if m == 0.0 || !m.is_finite() {
            return if m == 0.0 { Self::ZERO } else { self };
        }
        Self { mantissa: self.mantissa / m, ln_scale: self.ln_scale + m.ln() }
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let top = self.ln_scale.max(other.ln_scale);
        let z = self.mantissa * (self.ln_scale - top).exp() + other.mantissa * (other.ln_scale - top).exp();
        Self { mantissa: z, ln_scale: top }.normalized()
    }
}

/// Pairwise sum in a fixed tree shape determined only by the length.
pub fn pairwise_scaled(items: &[ScaledComplex]) -> ScaledComplex {
    match items.len() {
        0 => ScaledComplex::ZERO,
        1 => items[0],
        n => {
            let (a, b) = items.split_at(n / 2);
            pairwise_scaled(a).add(&pairwise_scaled(b))
        }
    }
}

pub fn pairwise_complex(items: &[Complex64]) -> Complex64 {
    if items.len() <= 8 {
        return items.iter().fold(Complex64::new(0.0, 0.0), |a, b| a + b);
    }
    let (a, b) = items.split_at(items.len() / 2);
    pairwise_complex(a) + pairwise_complex(b)
}

pub fn pairwise_real(items: &[f64]) -> f64 {
    if items.len() <= 8 {
        return items.iter().sum();
    }
    let (a, b) = items.split_at(items.len() / 2);
    pairwise_real(a) + pairwise_real(b)
}

/// Log-domain pairwise sum of `exp(items)`.
pub fn pairwise_ln(items: &[f64]) -> f64 {
    match items.len() {
        0 => f64::NEG_INFINITY,
        1 => items[0],
        n => {
            let (a, b) = items.split_at(n / 2);
            crate::special::ln_add_exp(pairwise_ln(a), pairwise_ln(b))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_sum_below_underflow() {
        let a = ScaledComplex { mantissa: Complex64::new(1.0, 0.0), ln_scale: -5000.0 };
        let b = ScaledComplex { mantissa: Complex64::new(2.0, 0.0), ln_scale: -5000.0 };
        let s = a.add(&b);
        assert!((s.ln_abs() - (3f64.ln() - 5000.0)).abs() < 1e-12);
        assert_eq!(s.to_complex(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn zero_is_identity() {
        let a = ScaledComplex::from_complex(Complex64::new(0.5, -1.0));
        assert_eq!(a.add(&ScaledComplex::ZERO), a);
        assert_eq!(ScaledComplex::ZERO.add(&a), a);
        assert!((a.to_complex() - Complex64::new(0.5, -1.0)).norm() < 1e-15);
    }
}
