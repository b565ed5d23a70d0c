//! Distribution of a single searcher's search time and the order statistics
//! of `N` independent searchers.
//!
//! A search is a sequence of independent attempts. Each attempt starts at
//! distance `D` and is a drift-diffusion killed at rate `lambda + r`; it
//! either reaches the object or is interrupted, after which the searcher
//! waits (an `Exp(mu)` relaunch delay, preceded by an `Exp(r)` detection
//! delay when the interruption was a loss) and starts over. The Laplace
//! transform of the search time `T` is
//!
//! ```text
//! E[e^{-sT}] = psi(s) / (1 - eta(s) delta(s))
//! psi(s)   = phi0(s + k)                      k = lambda + r
//! eta(s)   = k / (s + k) * (1 - phi0(s + k))
//! delta(s) = (r/k) mu/(s+mu) + (lambda/k) r/(s+r) mu/(s+mu)
//! phi0(s)  = exp(-(D/c)(b + sqrt(b^2 + 2cs)))
//! ```
//!
//! and `G(t) = P[T <= t]` is recovered by numerical inversion.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::analytic;
use crate::exec::{map_indexed, Execution};
use crate::laplace::{self, InversionOptions};
use crate::model::SearchParams;
use crate::special::{decay_rate, ln_norm_cdf, norm_cdf};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FptError {
    #[error("first-passage distribution needs c > 0")]
    ZeroDiffusion,
    #[error("search time is defective without curtailment (lambda + r = 0)")]
    NoCurtailment,
    #[error("Laplace inversion unstable at t = {t} (estimate {estimate}, error {error})")]
    InversionUnstable { t: f64, estimate: f64, error: f64 },
    #[error("density at the {p}-quantile ({density}) is below the numeric floor")]
    DensityVanishes { p: f64, density: f64 },
    #[error("G(B) = {g} at B = {b}: the object is practically unreachable in time")]
    ObjectUnreachableByB { b: f64, g: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Densities below this are treated as zero.
pub const DENSITY_FLOOR: f64 = 1e-300;
/// `G(B)` below this makes the required number of searchers meaningless.
pub const REACH_FLOOR: f64 = 1e-12;

/// Attempt structure of one searcher in a homogeneous medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttemptModel {
    pub params: SearchParams,
    /// Probability that an attempt reaches the object before interruption.
    pub success_prob_q: f64,
}

impl AttemptModel {
    pub fn new(params: SearchParams) -> Result<Self, FptError> {
        if params.diff_c <= 0.0 {
            return Err(FptError::ZeroDiffusion);
        }
        let q = attempt_success_probability_unchecked(&params);
        Ok(AttemptModel {
            params,
            success_prob_q: q,
        })
    }

    /// Laplace transform of the (possibly defective) uncurtailed first-passage time.
    pub fn pure_fpt_lt(&self, s: Complex64) -> Complex64 {
        let p = &self.params;
        if p.distance_d == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        let b = p.drift_b;
        let c = p.diff_c;
        let w = (b * b + 2.0 * c * s).sqrt();
        let rate = if b >= 0.0 { (b + w) / c } else { 2.0 * s / (w - b) };
        (-p.distance_d * rate).exp()
    }

    /// Laplace transform `E[exp(-sT)]` of the search time.
    pub fn search_time_lt(&self, s: Complex64) -> Complex64 {
        let p = &self.params;
        let (lambda, r, mu) = (p.loss_lambda, p.timeout_r, p.relaunch_mu);
        let k = lambda + r;
        if k == 0.0 {
            return self.pure_fpt_lt(s);
        }
        let sk = s + k;
        let phi = self.pure_fpt_lt(sk);
        let eta = k / sk * (1.0 - phi);
        let relaunch = mu / (s + mu);
        let detect = if r == 0.0 { Complex64::new(0.0, 0.0) } else { r / (s + r) };
        let delta = (r / k) * relaunch + (lambda / k) * detect * relaunch;
        phi / (1.0 - eta * delta)
    }

    /// `P[T <= t]` at a single point, clamped to `[0, 1]`.
    pub fn cdf_at(&self, t: f64, opts: &InversionOptions) -> Result<f64, FptError> {
        if self.params.distance_d == 0.0 {
            return Ok(1.0);
        }
        if t <= 0.0 {
            return Ok(0.0);
        }
        let v = self.invert(|s| self.search_time_lt(s) / s, t, opts, true)?;
        Ok(v.clamp(0.0, 1.0))
    }

    /// Density of `T` at a single point (zero when negative noise).
    pub fn density_at(&self, t: f64, opts: &InversionOptions) -> Result<f64, FptError> {
        if self.params.distance_d == 0.0 || t <= 0.0 {
            return Ok(0.0);
        }
        let v = self.invert(|s| self.search_time_lt(s), t, opts, false)?;
        Ok(v.max(0.0))
    }

    fn invert<F>(&self, f: F, t: f64, opts: &InversionOptions, bounded: bool) -> Result<f64, FptError>
    where
        F: Fn(Complex64) -> Complex64,
    {
        let (v, err) = laplace::euler(&f, t, opts);
        let slack = 1e-4;
        let in_range = |x: f64| x.is_finite() && (!bounded || (-slack..=1.0 + slack).contains(&x));
        if err <= opts.tolerance && in_range(v) {
            return Ok(v);
        }
        let w = laplace::talbot(&f, t, opts.talbot_nodes);
        if in_range(w) && (w - v).abs() <= opts.tolerance.max(err) {
            return Ok(w);
        }
        if in_range(w) && !in_range(v) {
            return Ok(w);
        }
        Err(FptError::InversionUnstable { t, estimate: v, error: err.max((w - v).abs()) })
    }

    /// Mean search time from the transform, `-F'(0)` by complex-step
    /// differentiation.
    pub fn mean_from_transform(&self) -> f64 {
        let h = 1e-20;
        -self.search_time_lt(Complex64::new(0.0, h)).im / h
    }
}

fn attempt_success_probability_unchecked(p: &SearchParams) -> f64 {
    (-p.distance_d * decay_rate(p.drift_b, p.diff_c, p.curtailment())).exp()
}

/// CDF of the uncurtailed first-passage time from `D` to 0 (inverse
/// Gaussian, defective with mass `exp(-2bD/c)` when `b > 0`).
pub fn pure_fpt_cdf_g0(p: &SearchParams, t: f64) -> Result<f64, FptError> {
    if p.diff_c <= 0.0 {
        return Err(FptError::ZeroDiffusion);
    }
    let (b, c, d) = (p.drift_b, p.diff_c, p.distance_d);
    if d == 0.0 {
        return Ok(1.0);
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    let sd = (c * t).sqrt();
    let first = norm_cdf(-(d + b * t) / sd);
    // exp(-2bD/c) Phi((bt - D)/sd), in log space to survive b << 0.
    let second = (-2.0 * b * d / c + ln_norm_cdf((b * t - d) / sd)).exp();
    Ok((first + second).clamp(0.0, 1.0))
}

/// Probability that one attempt succeeds before a loss or timeout,
/// `phi0(lambda + r)`.
pub fn attempt_success_probability(p: &SearchParams) -> Result<f64, FptError> {
    if p.diff_c <= 0.0 {
        return Err(FptError::ZeroDiffusion);
    }
    Ok(attempt_success_probability_unchecked(p))
}

pub fn search_time_lt(p: &SearchParams, s: Complex64) -> Result<Complex64, FptError> {
    Ok(AttemptModel::new(*p)?.search_time_lt(s))
}

/// Search-time distribution tabulated on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FptResult {
    pub grid: Vec<f64>,
    pub g_cdf: Vec<f64>,
    pub g_density: Vec<f64>,
    pub q: f64,
}

/// `G` and `g` on an increasing, non-negative grid. `G` is clamped to
/// `[0, 1]` and made non-decreasing.
pub fn cdf_g(p: &SearchParams, grid: &[f64], opts: &InversionOptions, exec: Execution) -> Result<FptResult, FptError> {
    let model = AttemptModel::new(*p)?;
    if p.curtailment() == 0.0 {
        return Err(FptError::NoCurtailment);
    }
    if grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FptError::InvalidArgument("grid must be finite, non-negative and strictly increasing".into()));
    }
    let points = map_indexed(grid.len(), exec, |i| {
        let t = grid[i];
        Ok::<_, FptError>((model.cdf_at(t, opts)?, model.density_at(t, opts)?))
    });
    let mut g_cdf = Vec::with_capacity(grid.len());
    let mut g_density = Vec::with_capacity(grid.len());
    let mut running = 0.0_f64;
    for point in points {
        let (g, dens) = point?;
        running = running.max(g);
        g_cdf.push(running);
        g_density.push(dens);
    }
    Ok(FptResult {
        grid: grid.to_vec(),
        g_cdf,
        g_density,
        q: model.success_prob_q,
    })
}

/// `G^{-1}(p) = inf { t : G(t) >= p }` by bisection, to `1e-6 E[T]`.
pub fn quantile(p: &SearchParams, prob: f64, opts: &InversionOptions) -> Result<f64, FptError> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(FptError::InvalidArgument(format!("probability {prob} outside (0, 1)")));
    }
    let model = AttemptModel::new(*p)?;
    if p.curtailment() == 0.0 {
        return Err(FptError::NoCurtailment);
    }
    if p.distance_d == 0.0 {
        return Ok(0.0);
    }
    let mean = model.mean_from_transform();
    let tol = 1e-6 * mean;
    let mut hi = mean;
    while model.cdf_at(hi, opts)? < prob {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(FptError::InvalidArgument("quantile bracket diverged".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if model.cdf_at(mid, opts)? >= prob {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `P[T_{k,N} <= t]` given `G(t)`: at least `k` of `N` independent searchers
/// have succeeded.
pub fn order_statistic_cdf_from(g: f64, k: usize, n: usize) -> f64 {
    assert!(k >= 1 && k <= n, "need 1 <= k <= N");
    if g <= 0.0 {
        return 0.0;
    }
    if g >= 1.0 {
        return 1.0;
    }
    if n == 1 {
        return g;
    }
    // P[Bin(N, g) >= k] = I_g(k, N - k + 1)
    beta_reg(k as f64, (n - k + 1) as f64, g)
}

pub fn order_statistic_cdf(p: &SearchParams, k: usize, n: usize, t: f64, opts: &InversionOptions) -> Result<f64, FptError> {
    if k == 0 || k > n {
        return Err(FptError::InvalidArgument(format!("need 1 <= k <= N, got k = {k}, N = {n}")));
    }
    let g = AttemptModel::new(*p)?.cdf_at(t, opts)?;
    Ok(order_statistic_cdf_from(g, k, n))
}

/// Mean and variance of `T_{k,N}` from `int S` and `int 2t S`, where `S` is
/// the order-statistic survival function. Exact up to quadrature error.
pub fn order_statistic_moments(p: &SearchParams, k: usize, n: usize, opts: &InversionOptions) -> Result<(f64, f64), FptError> {
    if k == 0 || k > n {
        return Err(FptError::InvalidArgument(format!("need 1 <= k <= N, got k = {k}, N = {n}")));
    }
    if p.distance_d == 0.0 {
        return Ok((0.0, 0.0));
    }
    let model = AttemptModel::new(*p)?;
    let survival = |t: f64| -> Result<f64, FptError> { Ok(1.0 - order_statistic_cdf_from(model.cdf_at(t, opts)?, k, n)) };
    let mut upper = model.mean_from_transform().max(1e-9);
    while survival(upper)? > 1e-12 {
        upper *= 2.0;
        if !upper.is_finite() {
            return Err(FptError::InvalidArgument("survival function does not decay".into()));
        }
    }
    let intervals = 4000;
    let h = upper / intervals as f64;
    let (mut m1, mut m2) = (0.0, 0.0);
    for i in 0..=intervals {
        let t = i as f64 * h;
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let s = survival(t)?;
        m1 += w * s;
        m2 += w * 2.0 * t * s;
    }
    let (mean, second) = (m1 * h / 3.0, m2 * h / 3.0);
    Ok((mean, (second - mean * mean).max(0.0)))
}

/// Normal approximation of the sample `p`-quantile `T_{ceil(pN), N}`:
/// returns `(mean, variance)`.
pub fn quantile_clt(p: &SearchParams, prob: f64, n: usize, opts: &InversionOptions) -> Result<(f64, f64), FptError> {
    if n == 0 {
        return Err(FptError::InvalidArgument("N must be >= 1".into()));
    }
    let xi = quantile(p, prob, opts)?;
    let density = AttemptModel::new(*p)?.density_at(xi, opts)?;
    if !(density > DENSITY_FLOOR) {
        return Err(FptError::DensityVanishes { p: prob, density });
    }
    Ok((xi, prob * (1.0 - prob) / (n as f64 * density * density)))
}

/// Large-`N` estimate of the searchers needed so that `k` succeed by `B`,
/// `ceil(k / G(B))`.
pub fn searchers_needed_from(g_b: f64, b: f64, k: usize) -> Result<usize, FptError> {
    if !(g_b >= REACH_FLOOR) {
        return Err(FptError::ObjectUnreachableByB { b, g: g_b });
    }
    Ok((k as f64 / g_b).ceil() as usize)
}

pub fn searchers_needed(p: &SearchParams, b: f64, k: usize, opts: &InversionOptions) -> Result<usize, FptError> {
    if !(b > 0.0) || k == 0 {
        return Err(FptError::InvalidArgument("need B > 0 and k >= 1".into()));
    }
    let g = AttemptModel::new(*p)?.cdf_at(b, opts)?;
    searchers_needed_from(g, b, k)
}

/// Smallest `N >= k` with `P[T_{k,N} <= B] >= target`.
pub fn searchers_needed_exact_from(g_b: f64, b: f64, k: usize, target: f64) -> Result<usize, FptError> {
    if !(g_b >= REACH_FLOOR) {
        return Err(FptError::ObjectUnreachableByB { b, g: g_b });
    }
    let ok = |n: usize| order_statistic_cdf_from(g_b, k, n) >= target;
    let mut hi = k;
    while !ok(hi) {
        hi *= 2;
    }
    let mut lo = (hi / 2).max(k);
    if ok(lo) {
        return Ok(lo);
    }
    // invariant: !ok(lo), ok(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// One row of the required-searchers comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchersRow {
    pub deadline: f64,
    pub k: usize,
    pub g_at_deadline: f64,
    pub n_exact: usize,
    pub n_asymptotic: usize,
}

/// Required searchers over a sweep of deadlines, exact (median criterion)
/// against the `ceil(k / G(B))` approximation.
pub fn searchers_table(p: &SearchParams, k: usize, deadlines: &[f64], opts: &InversionOptions, exec: Execution) -> Result<Vec<SearchersRow>, FptError> {
    let model = AttemptModel::new(*p)?;
    map_indexed(deadlines.len(), exec, |i| {
        let b = deadlines[i];
        let g = model.cdf_at(b, opts)?;
        Ok(SearchersRow {
            deadline: b,
            k,
            g_at_deadline: g,
            n_exact: searchers_needed_exact_from(g, b, k, 0.5)?,
            n_asymptotic: searchers_needed_from(g, b, k)?,
        })
    })
    .into_iter()
    .collect()
}

/// Mean of `T` three ways: closed form, transform derivative, and
/// integration of `1 - G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanConsistency {
    pub closed_form: f64,
    pub from_transform: f64,
    pub from_cdf: f64,
    /// Largest relative deviation from the closed form.
    pub relative_difference: f64,
}

impl MeanConsistency {
    pub fn within(&self, tolerance: f64) -> bool {
        self.relative_difference <= tolerance
    }
}

/// Compares the closed-form single-searcher mean with the renewal transform.
pub fn mean_consistency(p: &SearchParams, opts: &InversionOptions) -> Result<MeanConsistency, FptError> {
    let model = AttemptModel::new(*p)?;
    if p.curtailment() == 0.0 {
        return Err(FptError::NoCurtailment);
    }
    let closed_form = analytic::mean_time(p, 1, 0.0).map_err(|e| FptError::InvalidArgument(e.to_string()))?;
    let from_transform = model.mean_from_transform();
    // integrate 1 - G on [0, 40 E[T]] with Simpson's rule
    let upper = 40.0 * from_transform.max(1e-12);
    let n = 4000;
    let h = upper / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let t = i as f64 * h;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * (1.0 - model.cdf_at(t, opts)?);
    }
    let from_cdf = acc * h / 3.0;
    let rel = |x: f64| if closed_form == 0.0 { x.abs() } else { ((x - closed_form) / closed_form).abs() };
    Ok(MeanConsistency {
        closed_form,
        from_transform,
        from_cdf,
        relative_difference: rel(from_transform).max(rel(from_cdf)),
    })
}
