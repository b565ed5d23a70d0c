//! Closed-form mean search time and energy for `N` concurrent searchers in a
//! homogeneous medium.
//!
//! With `X(a) = (D/c) (b + sqrt(b^2 + 2c(lambda + r + a)))`:
//!
//! ```text
//! E[T_{1,N}]  = (mu + r + a) / (N (mu + a)(r + a)) * (e^X - 1)
//! E[J^-_{1,N}] = (e^X - 1) / (lambda + r + a)
//! a = (N - 1) / (N (1 + E[T_{1,N}]))
//! ```
//!
//! The attraction rate `a` couples each searcher to the others finishing
//! first; it is found by damped fixed-point iteration with a bisection
//! fallback.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{RaceFixedPoint, SearchParams, ValidationError};
use crate::special::{decay_rate, MAX_EXPONENT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("exponent {exponent} exceeds the representable range")]
    Overflow { exponent: f64 },
    #[error("no curtailment: lambda + r + a = 0")]
    DegenerateCurtailment,
    #[error("closed forms need c > 0 (use the deterministic limit for c = 0)")]
    ZeroDiffusion,
    #[error("N must be >= 1")]
    NoSearchers,
    #[error("fixed point did not converge in {max_iter} iterations (a = {last_a}, residual = {residual})")]
    NoConvergence { max_iter: usize, last_a: f64, residual: f64 },
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

/// Controls for [`mean_time_fixed_point`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    /// Relative tolerance on `a`.
    pub tol: f64,
    pub max_iter: usize,
    /// Damping weight of the new iterate.
    pub damping: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            tol: 1e-10,
            max_iter: 10_000,
            damping: 0.5,
        }
    }
}

fn check_inputs(p: &SearchParams, n: usize, a: f64) -> Result<(), AnalyticError> {
    if n == 0 {
        return Err(AnalyticError::NoSearchers);
    }
    if p.diff_c <= 0.0 {
        return Err(AnalyticError::ZeroDiffusion);
    }
    if p.curtailment() + a <= 0.0 {
        return Err(AnalyticError::DegenerateCurtailment);
    }
    Ok(())
}

/// Exponent `X(a)` shared by the time and energy formulas.
pub fn exponent(p: &SearchParams, a: f64) -> f64 {
    p.distance_d * decay_rate(p.drift_b, p.diff_c, p.curtailment() + a)
}

fn growth(p: &SearchParams, a: f64) -> Result<f64, AnalyticError> {
    let x = exponent(p, a);
    if x > MAX_EXPONENT {
        return Err(AnalyticError::Overflow { exponent: x });
    }
    Ok(x.exp_m1())
}

/// Mean time until the first of `n` searchers succeeds, at a given
/// attraction rate. Infinite when `r + a = 0` with losses present, since a
/// lost searcher is then never relaunched.
pub fn mean_time(p: &SearchParams, n: usize, a: f64) -> Result<f64, AnalyticError> {
    if p.distance_d == 0.0 {
        return Ok(0.0);
    }
    check_inputs(p, n, a)?;
    let g = growth(p, a)?;
    let r = p.timeout_r + a;
    if r == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mu = p.relaunch_mu + a;
    let value = (mu + p.timeout_r) / (n as f64 * mu * r) * g;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(AnalyticError::Overflow { exponent: exponent(p, a) })
    }
}

/// Mean energy spent by all searchers until the first success, with the rest
/// stopped at that instant.
pub fn mean_energy_first_success(p: &SearchParams, n: usize, a: f64) -> Result<f64, AnalyticError> {
    if p.distance_d == 0.0 {
        return Ok(0.0);
    }
    check_inputs(p, n, a)?;
    Ok(growth(p, a)? / (p.curtailment() + a))
}

fn attraction_map(p: &SearchParams, n: usize, a: f64) -> Result<f64, AnalyticError> {
    let t = mean_time(p, n, a)?;
    Ok((n - 1) as f64 / (n as f64 * (1.0 + t)))
}

/// Solves `a = (N-1)/(N(1 + E[T](a)))` and returns `a` with the mean time.
pub fn mean_time_fixed_point(p: &SearchParams, n: usize, opts: &FixedPointOptions) -> Result<RaceFixedPoint, AnalyticError> {
    if n == 0 {
        return Err(AnalyticError::NoSearchers);
    }
    if n == 1 || p.distance_d == 0.0 {
        let t = mean_time(p, n, 0.0)?;
        let a = if n == 1 { 0.0 } else { (n - 1) as f64 / n as f64 };
        return Ok(RaceFixedPoint {
            attraction_a: a,
            mean_time: t,
            iterations: 0,
            residual: 0.0,
        });
    }
    if p.diff_c <= 0.0 {
        return Err(AnalyticError::ZeroDiffusion);
    }
    let a_max = (n - 1) as f64 / n as f64;
    let mut a = if p.curtailment() > 0.0 { 0.0 } else { a_max };
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let next = attraction_map(p, n, a)?;
        residual = (next - a).abs();
        if residual <= opts.tol * next.abs() {
            let t = mean_time(p, n, next)?;
            let res = (attraction_map(p, n, next)? - next).abs();
            return Ok(RaceFixedPoint {
                attraction_a: next,
                mean_time: t,
                iterations: it,
                residual: res,
            });
        }
        a = (1.0 - opts.damping) * a + opts.damping * next;
        if a == 0.0 && p.curtailment() == 0.0 {
            break;
        }
    }
    bisect_fixed_point(p, n, a_max, opts).ok_or(AnalyticError::NoConvergence {
        max_iter: opts.max_iter,
        last_a: a,
        residual,
    })
}

/// Bisection on `h(a) = a - map(a)`, which is negative at `a = 0` and
/// non-negative at `a = (N-1)/N`.
fn bisect_fixed_point(p: &SearchParams, n: usize, a_max: f64, opts: &FixedPointOptions) -> Option<RaceFixedPoint> {
    let h = |a: f64| attraction_map(p, n, a).ok().map(|m| a - m);
    let (mut lo, mut hi) = (0.0_f64, a_max);
    if h(hi)? < 0.0 {
        return None;
    }
    for it in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = match h(mid) {
            Some(v) => v,
            // E[T] infinite at small a: the root lies above.
            None => -1.0,
        };
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= opts.tol * hi {
            let t = mean_time(p, n, hi).ok()?;
            return Some(RaceFixedPoint {
                attraction_a: hi,
                mean_time: t,
                iterations: opts.max_iter + it,
                residual: h(hi)?.abs(),
            });
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Finite,
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinitenessReason {
    /// `c = 0`, `b < 0`.
    DeterministicTowardObject,
    /// `c = 0`, `b >= 0`.
    DeterministicAwayOrZeroDrift,
    /// `c > 0` and losses, timeouts or the race curtail failing attempts.
    RandomisedWithCurtailment,
    /// `c > 0`, nothing curtails attempts, but the drift points at the object.
    RandomisedTowardObject,
    /// `c > 0`, nothing curtails attempts and the drift does not help.
    NoCurtailment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finiteness {
    pub verdict: Verdict,
    pub reason: FinitenessReason,
}

/// Whether the mean search time is finite.
pub fn classify_finiteness(p: &SearchParams, n: usize) -> Finiteness {
    use FinitenessReason::*;
    let (verdict, reason) = if p.diff_c == 0.0 {
        if p.drift_b < 0.0 {
            (Verdict::Finite, DeterministicTowardObject)
        } else {
            (Verdict::Infinite, DeterministicAwayOrZeroDrift)
        }
    } else {
        let a = if n > 1 {
            mean_time_fixed_point(p, n, &FixedPointOptions::default())
                .map(|fp| fp.attraction_a)
                .unwrap_or(0.0)
        } else {
            0.0
        };
        if p.curtailment() + a > 0.0 {
            (Verdict::Finite, RandomisedWithCurtailment)
        } else if p.drift_b < 0.0 {
            (Verdict::Finite, RandomisedTowardObject)
        } else {
            (Verdict::Infinite, NoCurtailment)
        }
    };
    Finiteness { verdict, reason }
}

/// Mean search time of a single deterministic searcher (`c -> 0`).
/// Returns `f64::INFINITY` when the object is never reached.
pub fn deterministic_limit_mean_time(p: &SearchParams) -> f64 {
    if p.distance_d == 0.0 {
        return 0.0;
    }
    if p.drift_b >= 0.0 {
        return f64::INFINITY;
    }
    let speed = -p.drift_b;
    let (r, mu) = (p.timeout_r, p.relaunch_mu);
    if r == 0.0 {
        // Without timeouts a lost searcher is never replaced.
        return if p.loss_lambda > 0.0 { f64::INFINITY } else { p.distance_d / speed };
    }
    let x = p.distance_d * p.curtailment() / speed;
    if x > MAX_EXPONENT {
        return f64::INFINITY;
    }
    (mu + r) / (mu * r) * x.exp_m1()
}

/// Long-run probability of the synchronised rest state, `1 / (1 + E[T])`.
pub fn rest_state_probability(mean_time: f64) -> f64 {
    1.0 / (1.0 + mean_time)
}
