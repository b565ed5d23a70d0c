//! Numerical inversion of Laplace transforms.
//!
//! The primary method is the Fourier-series (Bromwich trapezoid) inversion
//! with Euler summation of the alternating tail. A fixed-Talbot contour is
//! kept as a fallback for transforms where the series misbehaves.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Inversion tuning. `terms` partial-sum terms are taken before Euler
/// averaging over `averaging + 1` further partial sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionOptions {
    pub terms: usize,
    pub averaging: usize,
    /// Contour abscissa parameter; discretisation error is about `exp(-a)`.
    pub abscissa: f64,
    pub talbot_nodes: usize,
    /// Allowed disagreement between the two Euler estimates before the
    /// result is considered unstable.
    pub tolerance: f64,
}

impl Default for InversionOptions {
    fn default() -> Self {
        InversionOptions {
            terms: 30,
            averaging: 12,
            abscissa: 18.4,
            talbot_nodes: 32,
            tolerance: 1e-6,
        }
    }
}

/// Euler-summed Bromwich inversion at `t > 0`.
///
/// Returns the estimate and an error indicator (difference with the estimate
/// obtained from one fewer partial sum).
pub fn euler<F>(f: F, t: f64, opts: &InversionOptions) -> (f64, f64)
where
    F: Fn(Complex64) -> Complex64,
{
    let n = opts.terms;
    let m = opts.averaging;
    let a = opts.abscissa;
    let scale = (a / 2.0).exp() / t;
    let mut partial = Vec::with_capacity(n + m + 1);
    let mut sum = 0.5 * f(Complex64::new(a / (2.0 * t), 0.0)).re;
    partial.push(sum);
    for k in 1..=(n + m) {
        let s = Complex64::new(a, 2.0 * k as f64 * PI) / (2.0 * t);
        let term = f(s).re;
        sum += if k % 2 == 0 { term } else { -term };
        partial.push(sum);
    }
    let average = |start: usize| {
        let mut binom = 1.0;
        let mut acc = 0.0;
        for j in 0..=m {
            acc += binom * partial[start + j];
            binom *= (m - j) as f64 / (j + 1) as f64;
        }
        acc * 0.5_f64.powi(m as i32)
    };
    let hi = scale * average(n);
    let lo = scale * average(n - 1);
    (hi, (hi - lo).abs())
}

/// Fixed-Talbot inversion at `t > 0`.
pub fn talbot<F>(f: F, t: f64, nodes: usize) -> f64
where
    F: Fn(Complex64) -> Complex64,
{
    let m = nodes as f64;
    let r = 2.0 * m / (5.0 * t);
    let mut acc = 0.5 * (f(Complex64::new(r, 0.0)) * (r * t).exp()).re;
    for k in 1..nodes {
        let theta = k as f64 * PI / m;
        let cot = theta.cos() / theta.sin();
        let s = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        acc += ((s * t).exp() * f(s) * Complex64::new(1.0, sigma)).re;
    }
    r / m * acc
}
