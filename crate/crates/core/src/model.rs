//! Domain types shared by every solver: homogeneous search parameters, race
//! specifications, segmented media and Monte Carlo estimates.
//!
//! Everything here is an immutable value type once validated. Raw
//! (unvalidated) forms mirror the JSON configuration schema and are turned
//! into checked values by [`validate`] and friends, which never clamp.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Validation failures. Each variant names the offending field.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("missing required field `{0}`")]
    Missing(&'static str),
    #[error("field `{field}` must be finite, got {value}")]
    NonFinite { field: &'static str, value: f64 },
    #[error("field `mu` must be > 0, got {0}")]
    NonPositiveMu(f64),
    #[error("rate `{field}` must be >= 0, got {value}")]
    NegativeRate { field: &'static str, value: f64 },
    #[error("distance `D` must be >= 0, got {0}")]
    NegativeDistance(f64),
    #[error("diffusion `{field}` must be >= 0, got {value}")]
    NegativeDiffusion { field: &'static str, value: f64 },
    #[error("need 1 <= k <= N, got N = {n}, k = {k}")]
    BadRace { n: usize, k: usize },
    #[error("segment {index}: {reason}")]
    BadSegment { index: usize, reason: String },
}

/// Parameters of a homogeneous medium plus the relaunch protocol.
///
/// All rates are stored as rates; the mean timeout is `1 / timeout_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    /// Mean rate of change of the distance to the object (negative = approaching).
    #[serde(rename = "b")]
    pub drift_b: f64,
    /// Variance of the distance travelled per unit time.
    #[serde(rename = "c")]
    pub diff_c: f64,
    /// Loss (destruction) rate while searching.
    #[serde(rename = "lambda")]
    pub loss_lambda: f64,
    /// Timeout rate.
    #[serde(rename = "r")]
    pub timeout_r: f64,
    /// Relaunch rate after a timeout.
    #[serde(rename = "mu")]
    pub relaunch_mu: f64,
    /// Initial distance to the object.
    #[serde(rename = "D")]
    pub distance_d: f64,
}

/// Unchecked parameters as read from a config file or command line.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RawSearchParams {
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub lambda: Option<f64>,
    pub r: Option<f64>,
    pub mu: Option<f64>,
    #[serde(rename = "D")]
    pub d: Option<f64>,
}

impl From<SearchParams> for RawSearchParams {
    fn from(p: SearchParams) -> Self {
        RawSearchParams {
            b: Some(p.drift_b),
            c: Some(p.diff_c),
            lambda: Some(p.loss_lambda),
            r: Some(p.timeout_r),
            mu: Some(p.relaunch_mu),
            d: Some(p.distance_d),
        }
    }
}

fn finite(field: &'static str, v: Option<f64>) -> Result<f64, ValidationError> {
    let v = v.ok_or(ValidationError::Missing(field))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ValidationError::NonFinite { field, value: v })
    }
}

fn rate(field: &'static str, v: Option<f64>) -> Result<f64, ValidationError> {
    let v = finite(field, v)?;
    if v < 0.0 {
        return Err(ValidationError::NegativeRate { field, value: v });
    }
    Ok(v)
}

/// Checks a raw parameter set. Fields are checked in the order
/// `b, c, lambda, r, mu, D` and the first failure is returned.
pub fn validate(raw: &RawSearchParams) -> Result<SearchParams, ValidationError> {
    let b = finite("b", raw.b)?;
    let c = finite("c", raw.c)?;
    if c < 0.0 {
        return Err(ValidationError::NegativeDiffusion { field: "c", value: c });
    }
    let lambda = rate("lambda", raw.lambda)?;
    let r = rate("r", raw.r)?;
    let mu = finite("mu", raw.mu)?;
    if mu <= 0.0 {
        return Err(ValidationError::NonPositiveMu(mu));
    }
    let d = finite("D", raw.d)?;
    if d < 0.0 {
        return Err(ValidationError::NegativeDistance(d));
    }
    Ok(SearchParams {
        drift_b: b,
        diff_c: c,
        loss_lambda: lambda,
        timeout_r: r,
        relaunch_mu: mu,
        distance_d: d,
    })
}

impl SearchParams {
    /// Validating constructor, arguments in `(b, c, lambda, r, mu, D)` order.
    pub fn new(b: f64, c: f64, lambda: f64, r: f64, mu: f64, d: f64) -> Result<Self, ValidationError> {
        validate(&RawSearchParams {
            b: Some(b),
            c: Some(c),
            lambda: Some(lambda),
            r: Some(r),
            mu: Some(mu),
            d: Some(d),
        })
    }

    /// Total interruption rate of an attempt, `lambda + r`.
    pub fn curtailment(&self) -> f64 {
        self.loss_lambda + self.timeout_r
    }

    /// Same parameters with a different timeout rate.
    pub fn with_timeout_rate(&self, r: f64) -> Result<Self, ValidationError> {
        Self::new(self.drift_b, self.diff_c, self.loss_lambda, r, self.relaunch_mu, self.distance_d)
    }

    pub fn with_distance(&self, d: f64) -> Result<Self, ValidationError> {
        Self::new(self.drift_b, self.diff_c, self.loss_lambda, self.timeout_r, self.relaunch_mu, d)
    }

    /// Mean timeout `1 / r` (infinite when there is no timeout).
    pub fn timeout_mean(&self) -> f64 {
        1.0 / self.timeout_r
    }
}

/// What happens to the other searchers once `k` of them have succeeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Stopping {
    /// All remaining searchers are stopped at once.
    #[default]
    StopAll,
    /// Remaining searchers finish their current attempt.
    NoStop,
}

/// `N` concurrent searchers, success once `k` of them have found the object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceSpec {
    #[serde(rename = "N")]
    pub n_searchers: usize,
    #[serde(rename = "k")]
    pub k_required: usize,
    pub stopping: Stopping,
}

impl RaceSpec {
    pub fn new(n: usize, k: usize, stopping: Stopping) -> Result<Self, ValidationError> {
        if k == 0 || k > n {
            return Err(ValidationError::BadRace { n, k });
        }
        Ok(RaceSpec {
            n_searchers: n,
            k_required: k,
            stopping,
        })
    }

    /// First success among `n` searchers with all others stopped.
    pub fn first_of(n: usize) -> Result<Self, ValidationError> {
        Self::new(n, 1, Stopping::StopAll)
    }
}

/// Stationary solution of the attraction fixed point for `N` racing searchers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaceFixedPoint {
    /// Attraction rate `a`; zero for a single searcher.
    pub attraction_a: f64,
    /// Mean time until the first of the `N` searchers succeeds.
    pub mean_time: f64,
    pub iterations: usize,
    /// `|a - (N-1)/(N(1+E[T]))|` at the returned point.
    pub residual: f64,
}

/// One piece of a piecewise-constant medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    /// Width of the segment; `f64::INFINITY` for the unbounded tail.
    pub size: f64,
    pub drift_b: f64,
    pub diff_c: f64,
    pub loss_lambda: f64,
}

/// Piecewise-constant medium. Segment 0 touches the object; the last one
/// extends to infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentProfile {
    segments: Vec<Segment>,
    /// Right edge of each finite segment (cumulative sizes).
    edges: Vec<f64>,
    pub timeout_r: f64,
    pub relaunch_mu: f64,
    pub distance_d: f64,
}

impl SegmentProfile {
    pub fn new(segments: Vec<Segment>, timeout_r: f64, relaunch_mu: f64, distance_d: f64) -> Result<Self, ValidationError> {
        if segments.is_empty() {
            return Err(ValidationError::BadSegment {
                index: 0,
                reason: "profile has no segments".into(),
            });
        }
        let last = segments.len() - 1;
        let mut edges = Vec::with_capacity(last);
        let mut acc = 0.0;
        for (i, s) in segments.iter().enumerate() {
            let bad = |reason: &str| ValidationError::BadSegment {
                index: i,
                reason: reason.to_string(),
            };
            if i == last {
                if s.size != f64::INFINITY {
                    return Err(bad("last segment must be unbounded"));
                }
            } else if !(s.size.is_finite() && s.size > 0.0) {
                return Err(bad("inner segments need a finite size > 0"));
            }
            if !s.drift_b.is_finite() {
                return Err(bad("drift must be finite"));
            }
            if !(s.diff_c.is_finite() && s.diff_c > 0.0) {
                return Err(bad("diffusion must be finite and > 0"));
            }
            if !(s.loss_lambda.is_finite() && s.loss_lambda >= 0.0) {
                return Err(bad("loss rate must be finite and >= 0"));
            }
            if i < last {
                acc += s.size;
                edges.push(acc);
            }
        }
        rate("r", Some(timeout_r))?;
        let mu = finite("mu", Some(relaunch_mu))?;
        if mu <= 0.0 {
            return Err(ValidationError::NonPositiveMu(mu));
        }
        let d = finite("D", Some(distance_d))?;
        if d < 0.0 {
            return Err(ValidationError::NegativeDistance(d));
        }
        Ok(SegmentProfile {
            segments,
            edges,
            timeout_r,
            relaunch_mu,
            distance_d,
        })
    }

    /// Single unbounded segment carrying the homogeneous parameters.
    pub fn homogeneous(p: &SearchParams) -> Result<Self, ValidationError> {
        Self::new(
            vec![Segment {
                size: f64::INFINITY,
                drift_b: p.drift_b,
                diff_c: p.diff_c,
                loss_lambda: p.loss_lambda,
            }],
            p.timeout_r,
            p.relaunch_mu,
            p.distance_d,
        )
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Left edge of segment `k`.
    pub fn left_edge(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.edges[k - 1]
        }
    }

    /// Index of the segment containing `z`; interfaces belong to the outer segment.
    pub fn locate(&self, z: f64) -> usize {
        self.edges.partition_point(|&e| e <= z)
    }

    /// Same medium with a different starting distance.
    pub fn with_distance(&self, d: f64) -> Result<Self, ValidationError> {
        Self::new(self.segments.clone(), self.timeout_r, self.relaunch_mu, d)
    }

    /// Splits segment `k` at fraction `frac` of its width into two identical pieces.
    /// For the tail, the split point is `left_edge + frac` (absolute width).
    pub fn refined(&self, k: usize, frac: f64) -> Result<Self, ValidationError> {
        let mut segs = self.segments.clone();
        let s = segs[k];
        let first = if s.size.is_finite() { s.size * frac } else { frac };
        let second = if s.size.is_finite() { s.size - first } else { f64::INFINITY };
        segs[k] = Segment { size: first, ..s };
        segs.insert(k + 1, Segment { size: second, ..s });
        Self::new(segs, self.timeout_r, self.relaunch_mu, self.distance_d)
    }
}

/// JSON form of a segment: `size` is omitted or `null` for the tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSegment {
    #[serde(default)]
    pub size: Option<f64>,
    pub b: f64,
    pub c: f64,
    pub lambda: f64,
}

impl From<&Segment> for RawSegment {
    fn from(s: &Segment) -> Self {
        RawSegment {
            size: s.size.is_finite().then_some(s.size),
            b: s.drift_b,
            c: s.diff_c,
            lambda: s.loss_lambda,
        }
    }
}

/// Top-level JSON configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Config {
    #[serde(flatten)]
    pub params: RawSearchParams,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopping: Option<Stopping>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<RawSegment>>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn search_params(&self) -> Result<SearchParams, ValidationError> {
        validate(&self.params)
    }

    /// Race spec with defaults `N = 1`, `k = 1`, `StopAll`.
    pub fn race(&self) -> Result<RaceSpec, ValidationError> {
        RaceSpec::new(self.n.unwrap_or(1), self.k.unwrap_or(1), self.stopping.unwrap_or_default())
    }

    /// Segmented profile, if `segments` is present. `r`, `mu` and `D` come
    /// from the top level.
    pub fn profile(&self) -> Result<Option<SegmentProfile>, ValidationError> {
        let Some(raw) = &self.segments else {
            return Ok(None);
        };
        let segments = raw
            .iter()
            .map(|s| Segment {
                size: s.size.unwrap_or(f64::INFINITY),
                drift_b: s.b,
                diff_c: s.c,
                loss_lambda: s.lambda,
            })
            .collect();
        let r = rate("r", self.params.r)?;
        let mu = finite("mu", self.params.mu)?;
        let d = finite("D", self.params.d)?;
        SegmentProfile::new(segments, r, mu, d).map(Some)
    }
}

/// Monte Carlo estimate of a mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub samples: usize,
    /// 95% normal-approximation half width, `1.96 sqrt(variance / samples)`.
    pub ci_half_width: f64,
}

impl SimEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return SimEstimate {
                mean: f64::NAN,
                variance: f64::NAN,
                samples: 0,
                ci_half_width: f64::NAN,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        SimEstimate {
            mean,
            variance,
            samples: n,
            ci_half_width: 1.96 * (variance / n as f64).sqrt(),
        }
    }

    /// Whether `value` lies within `multiples` half widths of the mean.
    pub fn covers(&self, value: f64, multiples: f64) -> bool {
        (self.mean - value).abs() <= multiples * self.ci_half_width
    }
}
