//! Log-space binomial weights and a few numerical helpers.
//!
//! The binomial probability is evaluated with Loader's saddle-point
//! decomposition (Stirling remainder plus deviance), which keeps full relative
//! accuracy for levels far beyond the range where `C(n, k)` overflows.

use std::f64::consts::{PI, TAU};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const TAU_HI: f64 = TAU;
const TAU_LO: f64 = 2.449_293_598_294_706_4e-16;

/// Stirling remainder `ln n! - ((n + 1/2) ln n - n + ln sqrt(2 pi))` for integer `n >= 1`.
pub fn stirlerr(n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if n <= 15 {
        let mut ln_fact = 0.0;
        let mut acc = 1.0_f64;
        for j in 2..=n {
            acc *= j as f64;
        }
        ln_fact += acc.ln();
        let x = n as f64;
        return ln_fact - (x + 0.5) * x.ln() + x - LN_SQRT_2PI;
    }
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let x = n as f64;
    let nn = x * x;
    if n > 500 {
        (S0 - S1 / nn) / x
    } else if n > 80 {
        (S0 - (S1 - S2 / nn) / nn) / x
    } else if n > 35 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / x
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / x
    }
}

/// Deviance term `x ln(x/np) + np - x`, accurate when `x` is close to `np`.
pub fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        let mut j = 1;
        loop {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
            j += 1;
            if j > 1000 {
                return s;
            }
        }
    }
    x * (x / np).ln() + np - x
}

/// `ln [C(n,k) p^k (1-p)^(n-k)]`, `-inf` for the exact zeros at `p in {0,1}`.
pub fn ln_binomial_pmf(k: u64, n: u64, p: f64) -> f64 {
    debug_assert!(k <= n);
    let q = 1.0 - p;
    if p <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q <= 0.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    if k == 0 {
        return if p < 0.1 {
            -bd0(nf, nf * q) - nf * p
        } else {
            nf * (-p).ln_1p()
        };
    }
    if k == n {
        return if q < 0.1 {
            -bd0(nf, nf * p) - nf * q
        } else {
            nf * p.ln()
        };
    }
    let kf = k as f64;
    let lc = stirlerr(n) - stirlerr(k) - stirlerr(n - k) - bd0(kf, nf * p) - bd0(nf - kf, nf * q);
    let lf = 2.0 * LN_SQRT_2PI + kf.ln() + (-kf / nf).ln_1p();
    lc - 0.5 * lf
}

/// `ln C(n, k)` via the same decomposition (used by oracles and cross-checks).
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k == 0 || k == n {
        return 0.0;
    }
    ln_binomial_pmf(k, n, 0.5) + n as f64 * std::f64::consts::LN_2
}

/// Error-free product `a*b = hi + lo`.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let hi = a * b;
    (hi, a.mul_add(b, -hi))
}

/// Reduces `sum_j x_j y_j` modulo `2 pi` into `(-pi, pi]`, using double-double
/// products so large integer eigenvalues do not lose the phase.
pub fn phase_mod_2pi(x: &[f64], y: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let (hi, lo) = two_prod(a, b);
        // hi - 2 pi m computed in two pieces so m*tau does not round away the residue
        let m = (hi / TAU_HI).round();
        let (mh, ml) = two_prod(m, TAU_HI);
        let r = ((hi - mh) - ml) - m * TAU_LO + lo;
        total += r;
    }
    wrap_pi(total)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_pi(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Distance from `x / (2 pi)` to the nearest integer, in units of turns.
pub fn turns_off_lattice(x: f64) -> f64 {
    let t = x / (2.0 * PI);
    (t - t.round()).abs()
}

/// `ln(e^a + e^b)` without overflow.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Regularized upper incomplete gamma `Q(m/2, x)` for a half-integer shape,
/// i.e. the chi-square survival function with `m` degrees of freedom at `2x`.
pub fn chi_square_tail(m: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if m.is_multiple_of(2) {
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..m / 2 {
            term *= x / j as f64;
            sum += term;
        }
        (-x).exp() * sum
    } else {
        let mut sum = libm::erfc(x.sqrt());
        let mut term = (x / PI).sqrt() * 2.0;
        let mut a = 0.5;
        for _ in 0..m / 2 {
            sum += (-x).exp() * term;
            a += 1.0;
            term *= x / a;
        }
        sum
    }
}
