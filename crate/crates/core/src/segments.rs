//! Killed-diffusion boundary problems in a piecewise-constant medium.
//!
//! For one attempt started at distance `z`, the success probability `u`, the
//! expected searching time `w` and the loss probability `l` all solve
//!
//! ```text
//! (c_k/2) y'' + b_k y' - (lambda_k + r) y = -f_k    on segment k
//! ```
//!
//! with `y` and `y'` continuous across interfaces, `y` bounded at infinity and
//! `y(0) = 1` for `u` (`f = 0`), `y(0) = 0` for `w` (`f = 1`) and `l`
//! (`f = lambda_k`). On each segment the solution is the particular value
//! `f_k / (lambda_k + r)` plus two exponentials, each scaled to be at most 1
//! on its segment. The tail keeps only the decaying one.
//!
//! Two solvers are provided. The transfer-matrix solver composes the exact
//! per-segment propagators in a log-scaled projective form and shoots on the
//! tail condition; it is used while the product is well conditioned. The
//! backward solver carries the affine relation `y' = sigma y + tau` from the
//! tail towards the object and never forms a growing exponential, so it is
//! the fallback for stiff media.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{map_indexed, Execution};
use crate::model::{Segment, SegmentProfile, ValidationError};

/// Largest transfer-matrix condition number accepted before switching solvers.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SegmentError {
    #[error("segment {index} has lambda + r = 0; the attempt is never curtailed there")]
    NoKilling { index: usize },
    #[error("transfer-matrix product is ill-conditioned (log10 condition {log10_condition:.1})")]
    IllConditioned { log10_condition: f64 },
    #[error("solution is not finite")]
    NonFinite,
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverMethod {
    TransferMatrix,
    BackwardRecursion,
}

/// Right-hand side of the boundary problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Forcing {
    Zero,
    Unit,
    Loss,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    /// Growing and decaying characteristic roots.
    up: f64,
    down: f64,
    particular: f64,
    left: f64,
    width: f64,
}

fn roots(b: f64, c: f64, k: f64) -> (f64, f64) {
    let s = (b * b + 2.0 * c * k).sqrt();
    // product of the roots is -2k/c; take the cancellation-free one first
    if b <= 0.0 {
        let up = (s - b) / c;
        (up, -2.0 * k / (c * up))
    } else {
        let down = -(b + s) / c;
        (-2.0 * k / (c * down), down)
    }
}

fn pieces(profile: &SegmentProfile, forcing: Forcing) -> Result<Vec<Piece>, SegmentError> {
    let r = profile.timeout_r;
    profile
        .segments()
        .iter()
        .enumerate()
        .map(|(i, s): (usize, &Segment)| {
            let k = s.loss_lambda + r;
            if k <= 0.0 {
                return Err(SegmentError::NoKilling { index: i });
            }
            let (up, down) = roots(s.drift_b, s.diff_c, k);
            let f = match forcing {
                Forcing::Zero => 0.0,
                Forcing::Unit => 1.0,
                Forcing::Loss => s.loss_lambda,
            };
            Ok(Piece {
                up,
                down,
                particular: f / k,
                left: profile.left_edge(i),
                width: s.size,
            })
        })
        .collect()
}

type Mat3 = [[f64; 3]; 3];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Propagator of `(y, y', w)` across width `s`, divided by `exp(up s)`.
fn scaled_propagator(p: &Piece, s: f64) -> Mat3 {
    let delta = p.up - p.down;
    let g = ((p.down - p.up) * s).exp();
    let corner = (-p.up * s).exp();
    let f11 = (p.up * g - p.down) / delta;
    let f12 = (1.0 - g) / delta;
    let f21 = p.up * p.down * (g - 1.0) / delta;
    let f22 = (p.up - p.down * g) / delta;
    let v = p.particular;
    [
        [f11, f12, v * corner - f11 * v],
        [f21, f22, -f21 * v],
        [0.0, 0.0, corner],
    ]
}

/// Product of propagators with a running log scale and log determinant of
/// its homogeneous 2x2 block.
#[derive(Clone, Copy)]
struct Scaled {
    m: Mat3,
    ln_det2: f64,
}

impl Scaled {
    fn identity() -> Self {
        Scaled {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            ln_det2: 0.0,
        }
    }

    fn then(&self, p: &Piece, s: f64) -> Self {
        let mut m = mat_mul(&scaled_propagator(p, s), &self.m);
        let mut ln_det2 = self.ln_det2 + (p.down - p.up) * s;
        let norm = m.iter().flatten().fold(0.0_f64, |a, x| a.max(x.abs()));
        if norm > 0.0 && norm.is_finite() {
            m.iter_mut().flatten().for_each(|x| *x /= norm);
            ln_det2 -= 2.0 * norm.ln();
        }
        Scaled { m, ln_det2 }
    }

    fn log10_condition(&self) -> f64 {
        let fro2: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| self.m[i][j].powi(2)).sum();
        (fro2.ln() - self.ln_det2) / std::f64::consts::LN_10
    }

    fn value(&self, start: [f64; 3]) -> f64 {
        let row = |i: usize| (0..3).map(|j| self.m[i][j] * start[j]).sum::<f64>();
        row(0) / row(2)
    }
}

fn transfer_solve(pieces: &[Piece], y0: f64, d: f64, at: usize) -> Result<f64, SegmentError> {
    let last = pieces.len() - 1;
    let tail = &pieces[last];
    if last == 0 {
        return Ok(tail.particular + (y0 - tail.particular) * (tail.down * d).exp());
    }
    let mut products = Vec::with_capacity(last + 1);
    products.push(Scaled::identity());
    for p in &pieces[..last] {
        let next = products.last().unwrap().then(p, p.width);
        products.push(next);
    }
    let full = products[last];
    let log10_condition = full.log10_condition();
    if !(log10_condition.is_finite() && log10_condition <= CONDITION_LIMIT.log10()) {
        return Err(SegmentError::IllConditioned { log10_condition });
    }
    // tail condition y' = down (y - particular) in homogeneous coordinates
    let ell = [-tail.down, 1.0, tail.down * tail.particular];
    let proj = |j: usize| (0..3).map(|i| ell[i] * full.m[i][j]).sum::<f64>();
    let slope = -(proj(0) * y0 + proj(2)) / proj(1);
    let start = [y0, slope, 1.0];
    let y = if at == last {
        let y_tail = full.value(start);
        tail.particular + (y_tail - tail.particular) * (tail.down * (d - tail.left)).exp()
    } else {
        let p = &pieces[at];
        products[at].then(p, d - p.left).value(start)
    };
    if y.is_finite() {
        Ok(y)
    } else {
        Err(SegmentError::NonFinite)
    }
}

fn backward_solve(pieces: &[Piece], y0: f64, d: f64, at: usize) -> Result<f64, SegmentError> {
    let last = pieces.len() - 1;
    let tail = &pieces[last];
    // affine relation y' = sigma y + tau at the right edge of each finite piece,
    // and the coefficients A = a0 + a1 B on that piece
    let mut coeffs = vec![(0.0, 0.0); last];
    let (mut sigma, mut tau) = (tail.down, -tail.down * tail.particular);
    for (i, p) in pieces[..last].iter().enumerate().rev() {
        let e_down = (p.down * p.width).exp();
        let e_up = (-p.up * p.width).exp();
        let a0 = (sigma * p.particular + tau) / (p.up - sigma);
        let a1 = e_down * (sigma - p.down) / (p.up - sigma);
        coeffs[i] = (a0, a1);
        let denom = 1.0 + e_up * a1;
        let new_sigma = (p.up * e_up * a1 + p.down) / denom;
        tau = p.up * e_up * a0 - new_sigma * (p.particular + e_up * a0);
        sigma = new_sigma;
    }
    let mut y_left = y0;
    for (i, p) in pieces[..last].iter().enumerate() {
        let (a0, a1) = coeffs[i];
        let e_up = (-p.up * p.width).exp();
        let b = (y_left - p.particular - e_up * a0) / (1.0 + e_up * a1);
        let a = a0 + a1 * b;
        if i == at {
            let z = d - p.left;
            let y = p.particular + a * (p.up * (z - p.width)).exp() + b * (p.down * z).exp();
            return if y.is_finite() { Ok(y) } else { Err(SegmentError::NonFinite) };
        }
        y_left = p.particular + a + b * (p.down * p.width).exp();
    }
    let y = tail.particular + (y_left - tail.particular) * (tail.down * (d - tail.left)).exp();
    if y.is_finite() {
        Ok(y)
    } else {
        Err(SegmentError::NonFinite)
    }
}

fn solve(profile: &SegmentProfile, forcing: Forcing, y0: f64, method: Option<SolverMethod>) -> Result<(f64, SolverMethod), SegmentError> {
    let ps = pieces(profile, forcing)?;
    let d = profile.distance_d;
    let at = profile.locate(d);
    match method {
        Some(SolverMethod::TransferMatrix) => Ok((transfer_solve(&ps, y0, d, at)?, SolverMethod::TransferMatrix)),
        Some(SolverMethod::BackwardRecursion) => Ok((backward_solve(&ps, y0, d, at)?, SolverMethod::BackwardRecursion)),
        None => match transfer_solve(&ps, y0, d, at) {
            Ok(y) => Ok((y, SolverMethod::TransferMatrix)),
            Err(SegmentError::IllConditioned { .. } | SegmentError::NonFinite) => {
                Ok((backward_solve(&ps, y0, d, at)?, SolverMethod::BackwardRecursion))
            }
            Err(e) => Err(e),
        },
    }
}

/// Per-attempt quantities for a single searcher starting at `D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentedSolution {
    /// Probability an attempt reaches the object.
    pub success_probability: f64,
    /// Expected searching time of one attempt.
    pub attempt_mean: f64,
    /// Probability an attempt ends in a loss.
    pub loss_probability: f64,
    /// Mean search time; `f64::INFINITY` when the object is never found.
    pub mean_time: f64,
    pub method: SolverMethod,
}

/// Solves all three boundary problems. `method` forces a solver; `None`
/// uses the transfer matrix when well conditioned and falls back otherwise.
pub fn solve_segmented(profile: &SegmentProfile, method: Option<SolverMethod>) -> Result<SegmentedSolution, SegmentError> {
    let (q, m1) = solve(profile, Forcing::Zero, 1.0, method)?;
    let (w, m2) = solve(profile, Forcing::Unit, 0.0, method)?;
    let (l, m3) = solve(profile, Forcing::Loss, 0.0, method)?;
    let method = if [m1, m2, m3].contains(&SolverMethod::BackwardRecursion) {
        SolverMethod::BackwardRecursion
    } else {
        SolverMethod::TransferMatrix
    };
    let q = q.clamp(0.0, 1.0);
    let l = l.clamp(0.0, 1.0 - q);
    let w = w.max(0.0);
    let r = profile.timeout_r;
    let mean_time = if profile.distance_d == 0.0 {
        0.0
    } else if q < f64::MIN_POSITIVE || (r == 0.0 && l > 0.0) {
        f64::INFINITY
    } else {
        let loss_wait = if l > 0.0 { l / r } else { 0.0 };
        (w + loss_wait + (1.0 - q) / profile.relaunch_mu) / q
    };
    Ok(SegmentedSolution {
        success_probability: q,
        attempt_mean: w,
        loss_probability: l,
        mean_time,
        method,
    })
}

/// Probability that one attempt started at `D` reaches the object.
pub fn killed_success_probability(profile: &SegmentProfile) -> Result<f64, SegmentError> {
    Ok(solve(profile, Forcing::Zero, 1.0, None)?.0.clamp(0.0, 1.0))
}

/// Single-searcher mean search time, `f64::INFINITY` when unreachable.
pub fn mean_time_segmented(profile: &SegmentProfile) -> Result<f64, SegmentError> {
    Ok(solve_segmented(profile, None)?.mean_time)
}

/// Grid of media with `lambda_k = exp(1/(k rho))` and
/// `b_k = -exp((1+eps)/(k rho))`, `k = 1..m` counted from the object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSweepSpec {
    pub rho_grid: Vec<f64>,
    pub epsilon_list: Vec<f64>,
    /// Segment count, the last one unbounded.
    pub m: usize,
    pub segment_size: f64,
    pub diff_c: f64,
    pub timeout_r: f64,
    pub relaunch_mu: f64,
    pub distance_d: f64,
}

impl PhaseSweepSpec {
    /// 61 log-spaced values of `rho` in `[0.05, 100]`, `eps` in `{0, 0.25, 0.5, 1}`,
    /// `m = 20` unit segments, `c = 1`, `D = 10`, `r = 0.05`, `mu = 0.025`.
    pub fn reference() -> Self {
        let (lo, hi, n) = (0.05_f64.ln(), 100.0_f64.ln(), 61);
        PhaseSweepSpec {
            rho_grid: (0..n).map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()).collect(),
            epsilon_list: vec![0.0, 0.25, 0.5, 1.0],
            m: 20,
            segment_size: 1.0,
            diff_c: 1.0,
            timeout_r: 0.05,
            relaunch_mu: 0.025,
            distance_d: 10.0,
        }
    }

    /// Medium for one grid point.
    pub fn profile(&self, rho: f64, epsilon: f64) -> Result<SegmentProfile, ValidationError> {
        if !(rho > 0.0) || !(epsilon >= 0.0) || self.m == 0 {
            return Err(ValidationError::BadSegment {
                index: 0,
                reason: format!("need rho > 0, eps >= 0, m >= 1 (rho={rho}, eps={epsilon}, m={})", self.m),
            });
        }
        let segs = (1..=self.m)
            .map(|k| {
                let x = 1.0 / (k as f64 * rho);
                Segment {
                    size: if k < self.m { self.segment_size } else { f64::INFINITY },
                    drift_b: -((1.0 + epsilon) * x).exp(),
                    diff_c: self.diff_c,
                    loss_lambda: x.exp(),
                }
            })
            .collect();
        SegmentProfile::new(segs, self.timeout_r, self.relaunch_mu, self.distance_d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointStatus {
    Ok,
    Infinite,
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub rho: f64,
    pub epsilon: f64,
    /// `None` when infinite or failed.
    pub mean_time: Option<f64>,
    pub status: PointStatus,
}

/// Mean search time over the grid, one row per `(eps, rho)` in
/// `epsilon_list`-major order. Failures are reported per row.
pub fn phase_sweep(spec: &PhaseSweepSpec, exec: Execution) -> Vec<PhaseRow> {
    let n_rho = spec.rho_grid.len();
    map_indexed(spec.epsilon_list.len() * n_rho, exec, |i| {
        let (epsilon, rho) = (spec.epsilon_list[i / n_rho], spec.rho_grid[i % n_rho]);
        let outcome = spec
            .profile(rho, epsilon)
            .map_err(SegmentError::from)
            .and_then(|p| mean_time_segmented(&p));
        let (mean_time, status) = match outcome {
            Ok(t) if t.is_finite() => (Some(t), PointStatus::Ok),
            Ok(_) => (None, PointStatus::Infinite),
            Err(e) => (None, PointStatus::Error(e.to_string())),
        };
        PhaseRow {
            rho,
            epsilon,
            mean_time,
            status,
        }
    })
}
