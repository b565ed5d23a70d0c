//! Small numeric kernels shared by the analytic and first-passage code.

use statrs::function::erf::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Largest exponent whose `exp` is safely representable.
pub const MAX_EXPONENT: f64 = 700.0;

/// Decay rate `(b + sqrt(b^2 + 2 c k)) / c` of the bounded solution of
/// `(c/2) u'' + b u' - k u = 0`, evaluated without cancellation.
pub fn decay_rate(b: f64, c: f64, k: f64) -> f64 {
    let root = (b * b + 2.0 * c * k).sqrt();
    if b >= 0.0 {
        (b + root) / c
    } else {
        2.0 * k / (root - b)
    }
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `ln Phi(x)`, accurate far into the lower tail.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        return norm_cdf(x).ln();
    }
    // Mills-ratio asymptotic series.
    let z = x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..8 {
        term *= -((2 * n - 1) as f64) / z;
        sum += term;
    }
    -0.5 * z - (-x).ln() - 0.5 * (2.0 * PI).ln() + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_rate_solves_characteristic_equation() {
        for &(b, c, k) in &[(0.2, 1.0, 0.11), (-0.3, 2.0, 0.5), (0.0, 1.0, 0.25), (-1e3, 1.0, 1e-3), (-4e8, 1.0, 4e8)] {
            let kappa = decay_rate(b, c, k);
            // root of (c/2) x^2 - b x - k = 0
            let residual = 0.5 * c * kappa * kappa - b * kappa - k;
            assert!(residual.abs() <= 1e-12 * (k + (b * kappa).abs()), "{b} {c} {k}");
            assert!(kappa > 0.0);
        }
        assert_eq!(decay_rate(-1.0, 1.0, 0.0), 0.0);
        assert!((decay_rate(0.5, 1.0, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tail_of_normal_cdf() {
        for &x in &[-5.0, -20.0, -29.0] {
            assert!((ln_norm_cdf(x) - norm_cdf(x).ln()).abs() < 1e-10);
        }
        // continuity across the switch point
        let a = ln_norm_cdf(-30.0 + 1e-9);
        let b = ln_norm_cdf(-30.0 - 1e-9);
        assert!((a - b).abs() < 1e-6);
        assert!(ln_norm_cdf(-100.0).is_finite());
    }
}
