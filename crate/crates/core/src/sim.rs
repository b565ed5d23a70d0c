//! Monte Carlo simulation of the searcher state machine.
//!
//! Each searcher alternates between searching (`S`) and waiting to be
//! relaunched. While searching, its distance to the object is a
//! drift-diffusion started at `D`, interrupted by a loss (rate `lambda`) or a
//! timeout (rate `r`). A timed-out searcher waits `Exp(mu)` before a fresh
//! searcher leaves the source; a lost one is first detected after `Exp(r)`.
//! Energy accrues at unit rate only while searching.
//!
//! Attempts are generated by an [`AttemptSampler`]:
//!
//! * [`ExactSampler`]: homogeneous media only. The uncurtailed hitting time
//!   is drawn from its inverse-Gaussian law and raced against an
//!   `Exp(lambda + r)` interruption, so there is no discretisation error.
//! * [`SteppedSampler`]: Euler-Maruyama steps of size `dt` with a
//!   Brownian-bridge crossing test, usable for any piecewise-constant medium.
//!
//! Replication `i` draws from ChaCha stream `i` of the configured seed, and
//! results are reduced in replication order, so output is bit-identical
//! whatever the worker count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, InverseGaussian, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic;
use crate::exec::{map_indexed, Execution};
use crate::model::{RaceSpec, SearchParams, SegmentProfile, SimEstimate, Stopping, ValidationError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("all {replications} replications hit the time cap {cap}")]
    TimeCapExceeded { replications: usize, cap: f64 },
    #[error("simulation needs c > 0")]
    ZeroDiffusion,
    #[error("exact sampling needs a homogeneous medium")]
    ExactNeedsHomogeneous,
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

/// How attempts are generated in homogeneous media. Segmented media are
/// always stepped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Engine {
    #[default]
    Exact,
    Stepped,
}

/// Censoring above this fraction marks an estimate as invalid.
pub const MAX_CENSORED_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Euler-Maruyama step for the stepped engine.
    pub dt: f64,
    pub replications: usize,
    pub seed: u64,
    /// Virtual-time cap per replication; `None` picks `1e3 E[T]` (or `1e6`).
    pub max_virtual_time: Option<f64>,
    /// Pair replications with negated normal increments (stepped engine).
    pub antithetic: bool,
    pub engine: Engine,
    pub execution: Execution,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-2,
            replications: 10_000,
            seed: 0x5eed,
            max_virtual_time: None,
            antithetic: false,
            engine: Engine::Exact,
            execution: Execution::Parallel,
        }
    }
}

impl SimConfig {
    pub fn with_replications(self, replications: usize) -> Self {
        SimConfig { replications, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SimConfig { seed, ..self }
    }

    pub fn stepped(self, dt: f64) -> Self {
        SimConfig {
            dt,
            engine: Engine::Stepped,
            ..self
        }
    }

    fn check(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidConfig(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.replications == 0 {
            return Err(SimError::InvalidConfig("replications must be >= 1".into()));
        }
        if let Some(cap) = self.max_virtual_time {
            if !(cap > 0.0) {
                return Err(SimError::InvalidConfig(format!("max_virtual_time must be > 0, got {cap}")));
            }
        }
        Ok(())
    }
}

/// Random stream for one replication.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Disjoint block of a replication's stream reserved for one searcher, so a
/// searcher's path does not depend on how long the others ran.
pub fn searcher_rng(seed: u64, replication: u64, searcher: usize) -> ChaCha8Rng {
    let mut rng = replication_rng(seed, replication);
    rng.set_word_pos((searcher as u128) << 48);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttemptOutcome {
    Success,
    Loss,
    Timeout,
    /// Still searching when the time budget ran out.
    Censored,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attempt {
    pub duration: f64,
    pub outcome: AttemptOutcome,
}

/// Source of independent attempts for one searcher.
pub trait AttemptSampler: Sync {
    /// One attempt from distance `D`. Samplers that step in time stop at
    /// `budget` and report [`AttemptOutcome::Censored`].
    fn sample<R: Rng>(&self, rng: &mut R, budget: f64, negate_normals: bool) -> Attempt;
    fn timeout_r(&self) -> f64;
    fn relaunch_mu(&self) -> f64;
}

/// Attempts drawn from the exact hitting-time law of a homogeneous medium.
#[derive(Debug, Clone)]
pub struct ExactSampler {
    params: SearchParams,
    hitting: Option<InverseGaussian<f64>>,
    hit_probability: f64,
}

impl ExactSampler {
    pub fn new(params: &SearchParams) -> Result<Self, SimError> {
        let (b, c, d) = (params.drift_b, params.diff_c, params.distance_d);
        if c <= 0.0 {
            return Err(SimError::ZeroDiffusion);
        }
        let hitting = if d > 0.0 && b != 0.0 {
            Some(InverseGaussian::new(d / b.abs(), d * d / c).map_err(|e| SimError::InvalidConfig(format!("{e:?}")))?)
        } else {
            None
        };
        let hit_probability = if b > 0.0 { (-2.0 * b * d / c).exp() } else { 1.0 };
        Ok(ExactSampler {
            params: *params,
            hitting,
            hit_probability,
        })
    }

    fn hitting_time<R: Rng>(&self, rng: &mut R) -> f64 {
        let p = &self.params;
        if p.drift_b == 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            return p.distance_d * p.distance_d / (p.diff_c * z * z);
        }
        if p.drift_b > 0.0 && rng.gen::<f64>() >= self.hit_probability {
            return f64::INFINITY;
        }
        self.hitting.as_ref().map_or(0.0, |ig| ig.sample(rng))
    }
}

impl AttemptSampler for ExactSampler {
    fn sample<R: Rng>(&self, rng: &mut R, budget: f64, _negate: bool) -> Attempt {
        let p = &self.params;
        if p.distance_d == 0.0 {
            return Attempt {
                duration: 0.0,
                outcome: AttemptOutcome::Success,
            };
        }
        let k = p.curtailment();
        let interrupt = if k > 0.0 {
            rng.sample::<f64, _>(Exp1) / k
        } else {
            f64::INFINITY
        };
        let hit = self.hitting_time(rng);
        if hit <= interrupt {
            return Attempt {
                duration: hit,
                outcome: AttemptOutcome::Success,
            };
        }
        if interrupt.is_infinite() {
            return Attempt {
                duration: budget,
                outcome: AttemptOutcome::Censored,
            };
        }
        let outcome = if rng.gen::<f64>() * k < p.loss_lambda {
            AttemptOutcome::Loss
        } else {
            AttemptOutcome::Timeout
        };
        Attempt {
            duration: interrupt,
            outcome,
        }
    }

    fn timeout_r(&self) -> f64 {
        self.params.timeout_r
    }

    fn relaunch_mu(&self) -> f64 {
        self.params.relaunch_mu
    }
}

#[derive(Debug, Clone, Copy)]
struct StepCoefficients {
    drift_step: f64,
    noise_scale: f64,
    /// `c dt`, for the bridge crossing probability.
    variance_step: f64,
    loss: f64,
}

/// Euler-Maruyama attempts in a piecewise-constant medium.
///
/// Crossings of 0 between grid points are detected with probability
/// `exp(-2 z0 z1 / (c dt))`, exact for Brownian motion with constant drift
/// over the step. A detected crossing is placed mid-step.
#[derive(Debug, Clone)]
pub struct SteppedSampler {
    profile: SegmentProfile,
    coefficients: Vec<StepCoefficients>,
    dt: f64,
}

impl SteppedSampler {
    pub fn new(profile: &SegmentProfile, dt: f64) -> Result<Self, SimError> {
        if !(dt > 0.0) {
            return Err(SimError::InvalidConfig(format!("dt must be > 0, got {dt}")));
        }
        let coefficients = profile
            .segments()
            .iter()
            .map(|s| StepCoefficients {
                drift_step: s.drift_b * dt,
                noise_scale: (s.diff_c * dt).sqrt(),
                variance_step: s.diff_c * dt,
                loss: s.loss_lambda,
            })
            .collect();
        Ok(SteppedSampler {
            profile: profile.clone(),
            coefficients,
            dt,
        })
    }

    pub fn homogeneous(params: &SearchParams, dt: f64) -> Result<Self, SimError> {
        if params.diff_c <= 0.0 {
            return Err(SimError::ZeroDiffusion);
        }
        Self::new(&SegmentProfile::homogeneous(params)?, dt)
    }
}

impl AttemptSampler for SteppedSampler {
    fn sample<R: Rng>(&self, rng: &mut R, budget: f64, negate_normals: bool) -> Attempt {
        let prof = &self.profile;
        let mut z = prof.distance_d;
        if z <= 0.0 {
            return Attempt {
                duration: 0.0,
                outcome: AttemptOutcome::Success,
            };
        }
        let h = self.dt;
        let r = prof.timeout_r;
        let timeout_at = if r > 0.0 {
            rng.sample::<f64, _>(Exp1) / r
        } else {
            f64::INFINITY
        };
        let loss_budget: f64 = rng.sample(Exp1);
        let mut hazard = 0.0;
        let mut t = 0.0;
        let mut idx = prof.locate(z);
        let last = self.coefficients.len() - 1;
        loop {
            if t >= budget {
                return Attempt {
                    duration: budget,
                    outcome: AttemptOutcome::Censored,
                };
            }
            let co = self.coefficients[idx];
            let loss_at = if co.loss > 0.0 {
                t + (loss_budget - hazard) / co.loss
            } else {
                f64::INFINITY
            };
            let (interrupt_at, interrupt) = if loss_at < timeout_at {
                (loss_at, AttemptOutcome::Loss)
            } else {
                (timeout_at, AttemptOutcome::Timeout)
            };
            let mut xi: f64 = rng.sample(StandardNormal);
            if negate_normals {
                xi = -xi;
            }
            let z_next = z + co.drift_step + co.noise_scale * xi;
            let crossed = z_next <= 0.0 || {
                let arg = 2.0 * z * z_next / co.variance_step;
                arg < 40.0 && rng.gen::<f64>() < (-arg).exp()
            };
            if crossed {
                let hit_at = t + 0.5 * h;
                return if interrupt_at < hit_at {
                    Attempt {
                        duration: interrupt_at,
                        outcome: interrupt,
                    }
                } else {
                    Attempt {
                        duration: hit_at,
                        outcome: AttemptOutcome::Success,
                    }
                };
            }
            if interrupt_at < t + h {
                return Attempt {
                    duration: interrupt_at,
                    outcome: interrupt,
                };
            }
            hazard += co.loss * h;
            t += h;
            z = z_next;
            while idx < last && z >= prof.left_edge(idx + 1) {
                idx += 1;
            }
            while idx > 0 && z < prof.left_edge(idx) {
                idx -= 1;
            }
        }
    }

    fn timeout_r(&self) -> f64 {
        self.profile.timeout_r
    }

    fn relaunch_mu(&self) -> f64 {
        self.profile.relaunch_mu
    }
}

/// Outcome of one replication of a race.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaceSample {
    /// Instant the `k`-th distinct searcher reaches the object.
    pub t_k: f64,
    /// Searching time of all searchers up to `t_k`.
    pub j_minus: f64,
    /// As `j_minus`, plus unfinished searchers completing their current attempt.
    pub j_plus: f64,
    /// Failed attempts ending before `t_k`.
    pub interruptions: u32,
    pub censored: bool,
}

#[derive(Clone, Copy)]
struct Interval {
    start: f64,
    end: f64,
    failed: bool,
}

fn relaunch_delay<S: AttemptSampler, R: Rng>(sampler: &S, rng: &mut R, outcome: AttemptOutcome) -> f64 {
    let wait = rng.sample::<f64, _>(Exp1) / sampler.relaunch_mu();
    match outcome {
        AttemptOutcome::Loss => {
            let r = sampler.timeout_r();
            if r > 0.0 {
                rng.sample::<f64, _>(Exp1) / r + wait
            } else {
                f64::INFINITY
            }
        }
        _ => wait,
    }
}

/// One replication: `n` independent searchers until `k` have succeeded.
fn run_race<S: AttemptSampler>(sampler: &S, n: usize, k: usize, cap: f64, seed: u64, stream: u64, negate: bool) -> RaceSample {
    let mut intervals: Vec<Interval> = Vec::new();
    // sorted, at most k entries
    let mut successes: Vec<f64> = Vec::with_capacity(k + 1);
    let mut cutoff = cap;
    for searcher in 0..n {
        let rng = &mut searcher_rng(seed, stream, searcher);
        let mut t = 0.0;
        while t < cutoff {
            let a = sampler.sample(rng, cap - t, negate);
            let end = t + a.duration;
            let failed = matches!(a.outcome, AttemptOutcome::Loss | AttemptOutcome::Timeout);
            intervals.push(Interval { start: t, end, failed });
            match a.outcome {
                AttemptOutcome::Success => {
                    let pos = successes.partition_point(|&s| s <= end);
                    successes.insert(pos, end);
                    successes.truncate(k);
                    break;
                }
                AttemptOutcome::Censored => break,
                _ => t = end + relaunch_delay(sampler, rng, a.outcome),
            }
        }
        if successes.len() == k {
            cutoff = cutoff.min(successes[k - 1]);
        }
    }
    let (t_k, censored) = match successes.get(k - 1) {
        Some(&tk) if tk <= cap => (tk, false),
        _ => (cap, true),
    };
    let mut j_minus = 0.0;
    let mut j_plus = 0.0;
    let mut interruptions = 0;
    for iv in &intervals {
        if iv.start < t_k {
            j_minus += iv.end.min(t_k) - iv.start;
            j_plus += iv.end - iv.start;
            if iv.failed && iv.end <= t_k {
                interruptions += 1;
            }
        }
    }
    RaceSample {
        t_k,
        j_minus,
        j_plus,
        interruptions,
        censored,
    }
}

/// Aggregated race results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceReport {
    pub race: RaceSpec,
    pub config: SimConfig,
    /// Cap actually used.
    pub cap: f64,
    /// Every replication in index order, censored ones included.
    pub samples: Vec<RaceSample>,
    /// Estimates over uncensored replications.
    pub t_k: SimEstimate,
    pub j_minus: SimEstimate,
    pub j_plus: SimEstimate,
    pub censored: usize,
    pub censored_fraction: f64,
    /// Censoring is at most [`MAX_CENSORED_FRACTION`].
    pub valid: bool,
}

impl RaceReport {
    /// Energy under the race's stopping rule.
    pub fn energy(&self) -> &SimEstimate {
        match self.race.stopping {
            Stopping::StopAll => &self.j_minus,
            Stopping::NoStop => &self.j_plus,
        }
    }

    /// Uncensored search times.
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().filter(|s| !s.censored).map(|s| s.t_k).collect()
    }

    fn build(race: RaceSpec, config: SimConfig, cap: f64, samples: Vec<RaceSample>) -> Result<Self, SimError> {
        let kept: Vec<&RaceSample> = samples.iter().filter(|s| !s.censored).collect();
        let censored = samples.len() - kept.len();
        if kept.is_empty() {
            return Err(SimError::TimeCapExceeded {
                replications: samples.len(),
                cap,
            });
        }
        let column = |f: fn(&RaceSample) -> f64| SimEstimate::from_samples(&kept.iter().map(|s| f(s)).collect::<Vec<_>>());
        let censored_fraction = censored as f64 / samples.len() as f64;
        Ok(RaceReport {
            race,
            config,
            cap,
            t_k: column(|s| s.t_k),
            j_minus: column(|s| s.j_minus),
            j_plus: column(|s| s.j_plus),
            censored,
            censored_fraction,
            valid: censored_fraction <= MAX_CENSORED_FRACTION,
            samples,
        })
    }
}

fn default_cap(mean: Option<f64>) -> f64 {
    match mean {
        Some(m) if m.is_finite() && m > 0.0 => 1e3 * m,
        _ => 1e6,
    }
}

fn replicate<S: AttemptSampler>(sampler: &S, race: &RaceSpec, config: &SimConfig, cap: f64) -> Vec<RaceSample> {
    let stepped_antithetic = config.antithetic && config.engine == Engine::Stepped;
    map_indexed(config.replications, config.execution, |i| {
        let (stream, negate) = if stepped_antithetic { (i & !1, i % 2 == 1) } else { (i, false) };
        run_race(sampler, race.n_searchers, race.k_required, cap, config.seed, stream as u64, negate)
    })
}

/// Simulates `N` searchers until `k` succeed, `config.replications` times.
pub fn simulate_race(params: &SearchParams, race: &RaceSpec, config: &SimConfig) -> Result<RaceReport, SimError> {
    config.check()?;
    if params.diff_c <= 0.0 {
        return Err(SimError::ZeroDiffusion);
    }
    let cap = config
        .max_virtual_time
        .unwrap_or_else(|| default_cap(analytic::mean_time(params, 1, 0.0).ok()));
    let samples = match config.engine {
        Engine::Exact => replicate(&ExactSampler::new(params)?, race, config, cap),
        Engine::Stepped => replicate(&SteppedSampler::homogeneous(params, config.dt)?, race, config, cap),
    };
    RaceReport::build(*race, *config, cap, samples)
}

/// One search by a single searcher.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearcherSample {
    pub time: f64,
    pub energy: f64,
    pub interruptions: u32,
    pub censored: bool,
}

/// One search on stream `replication` of `config.seed`, capped at
/// `config.max_virtual_time`.
pub fn simulate_searcher(params: &SearchParams, config: &SimConfig, replication: u64) -> Result<SearcherSample, SimError> {
    config.check()?;
    let cap = config
        .max_virtual_time
        .unwrap_or_else(|| default_cap(analytic::mean_time(params, 1, 0.0).ok()));
    let s = match config.engine {
        Engine::Exact => run_race(&ExactSampler::new(params)?, 1, 1, cap, config.seed, replication, false),
        Engine::Stepped => run_race(&SteppedSampler::homogeneous(params, config.dt)?, 1, 1, cap, config.seed, replication, false),
    };
    Ok(SearcherSample {
        time: s.t_k,
        energy: s.j_minus,
        interruptions: s.interruptions,
        censored: s.censored,
    })
}

/// Races in a segmented medium (always stepped). The default cap uses
/// `mean_hint` when given.
pub fn simulate_segmented_race(profile: &SegmentProfile, race: &RaceSpec, config: &SimConfig, mean_hint: Option<f64>) -> Result<RaceReport, SimError> {
    config.check()?;
    let cap = config.max_virtual_time.unwrap_or_else(|| default_cap(mean_hint));
    let sampler = SteppedSampler::new(profile, config.dt)?;
    let samples = replicate(&sampler, race, &SimConfig { engine: Engine::Stepped, ..*config }, cap);
    RaceReport::build(*race, *config, cap, samples)
}

/// Single-searcher search time in a segmented medium.
pub fn simulate_segmented(profile: &SegmentProfile, config: &SimConfig) -> Result<RaceReport, SimError> {
    let hint = crate::segments::mean_time_segmented(profile).ok();
    simulate_segmented_race(profile, &RaceSpec::first_of(1)?, config, hint)
}

/// Counts of single-attempt outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttemptStats {
    pub trials: usize,
    pub successes: usize,
    pub losses: usize,
    pub timeouts: usize,
    pub censored: usize,
    /// Mean searching time per attempt (censored attempts excluded).
    pub mean_duration: f64,
}

impl AttemptStats {
    pub fn success_fraction(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Independent single attempts in a segmented medium (stepped), each capped
/// at `config.max_virtual_time` (default `1e6`).
pub fn simulate_attempts(profile: &SegmentProfile, config: &SimConfig) -> Result<AttemptStats, SimError> {
    config.check()?;
    let sampler = SteppedSampler::new(profile, config.dt)?;
    let cap = config.max_virtual_time.unwrap_or(1e6);
    let attempts = map_indexed(config.replications, config.execution, |i| {
        let mut rng = replication_rng(config.seed, i as u64);
        sampler.sample(&mut rng, cap, false)
    });
    let mut stats = AttemptStats {
        trials: attempts.len(),
        successes: 0,
        losses: 0,
        timeouts: 0,
        censored: 0,
        mean_duration: 0.0,
    };
    let mut total = 0.0;
    for a in &attempts {
        match a.outcome {
            AttemptOutcome::Success => stats.successes += 1,
            AttemptOutcome::Loss => stats.losses += 1,
            AttemptOutcome::Timeout => stats.timeouts += 1,
            AttemptOutcome::Censored => {
                stats.censored += 1;
                continue;
            }
        }
        total += a.duration;
    }
    let ended = stats.trials - stats.censored;
    stats.mean_duration = if ended > 0 { total / ended as f64 } else { f64::NAN };
    Ok(stats)
}

/// Right-continuous empirical CDF of `samples` evaluated on `grid`.
pub fn empirical_cdf(samples: &[f64], grid: &[f64]) -> Vec<f64> {
    assert!(!samples.is_empty(), "empirical CDF of no samples");
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    grid.iter().map(|&t| sorted.partition_point(|&x| x <= t) as f64 / n).collect()
}

/// Largest absolute difference between two CDFs tabulated on the same grid.
pub fn kolmogorov_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Segment;

    fn fig5() -> SearchParams {
        SearchParams::new(0.0, 1.0, 0.0025, 1.0 / 78.0, 0.1, 10.0).unwrap()
    }

    #[test]
    fn zero_distance_finds_immediately() {
        let p = fig5().with_distance(0.0).unwrap();
        for engine in [Engine::Exact, Engine::Stepped] {
            let cfg = SimConfig { engine, ..Default::default() };
            let s = simulate_searcher(&p, &cfg, 0).unwrap();
            assert_eq!((s.time, s.energy), (0.0, 0.0));
        }
    }

    #[test]
    fn single_searcher_has_equal_energies() {
        let rep = simulate_race(&fig5(), &RaceSpec::first_of(1).unwrap(), &SimConfig::default().with_replications(500)).unwrap();
        for s in &rep.samples {
            assert_eq!(s.j_minus, s.j_plus);
        }
    }

    #[test]
    fn energy_bounds_hold_per_sample() {
        let race = RaceSpec::new(6, 2, Stopping::NoStop).unwrap();
        let rep = simulate_race(&fig5(), &race, &SimConfig::default().with_replications(500)).unwrap();
        for s in &rep.samples {
            assert!(0.0 <= s.j_minus && s.j_minus <= s.j_plus);
            assert!(s.j_minus <= 6.0 * s.t_k + 1e-9);
            assert!(s.j_plus <= 6.0 * rep.cap);
        }
    }

    #[test]
    fn drift_toward_object_mean_is_distance_over_speed() {
        // lambda = r = 0, b = -1: E[T] = D / |b| = 10
        let p = SearchParams::new(-1.0, 1.0, 0.0, 0.0, 0.05, 10.0).unwrap();
        let cfg = SimConfig::default().with_replications(100_000);
        let rep = simulate_race(&p, &RaceSpec::first_of(1).unwrap(), &cfg).unwrap();
        assert!(rep.t_k.covers(10.0, 3.0), "{:?}", rep.t_k);
        let cfg = SimConfig::default().with_replications(4_000).stepped(1e-2);
        let rep = simulate_race(&p, &RaceSpec::first_of(1).unwrap(), &cfg).unwrap();
        assert!(rep.t_k.covers(10.0, 3.0), "{:?}", rep.t_k);
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let race = RaceSpec::new(4, 2, Stopping::StopAll).unwrap();
        let par = SimConfig::default().with_replications(300);
        let seq = SimConfig {
            execution: Execution::Sequential,
            ..par
        };
        let a = simulate_race(&fig5(), &race, &par).unwrap();
        let b = simulate_race(&fig5(), &race, &seq).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.t_k.mean.to_bits(), b.t_k.mean.to_bits());
    }

    #[test]
    fn kth_success_ordering_within_replication() {
        let p = fig5();
        let cfg = SimConfig::default().with_replications(200);
        let reps: Vec<RaceReport> = (1..=5)
            .map(|k| simulate_race(&p, &RaceSpec::new(5, k, Stopping::StopAll).unwrap(), &cfg).unwrap())
            .collect();
        // per-searcher streams, so paths coincide until each cutoff
        for i in 0..200 {
            for k in 1..5 {
                assert!(reps[k].samples[i].t_k >= reps[k - 1].samples[i].t_k);
            }
        }
    }

    #[test]
    fn censoring_is_counted_not_averaged() {
        let p = fig5();
        let cfg = SimConfig {
            max_virtual_time: Some(50.0),
            ..SimConfig::default().with_replications(400)
        };
        let rep = simulate_race(&p, &RaceSpec::first_of(1).unwrap(), &cfg).unwrap();
        assert!(rep.censored > 0 && !rep.valid);
        assert_eq!(rep.t_k.samples + rep.censored, 400);
        assert!(rep.t_k.mean <= 50.0);
        let cfg = SimConfig {
            max_virtual_time: Some(1e-9),
            ..cfg
        };
        assert!(matches!(
            simulate_race(&p, &RaceSpec::first_of(1).unwrap(), &cfg),
            Err(SimError::TimeCapExceeded { .. })
        ));
    }

    #[test]
    fn antithetic_pairs_share_a_stream() {
        let cfg = SimConfig {
            antithetic: true,
            ..SimConfig::default().with_replications(6).stepped(0.05)
        };
        let rep = simulate_race(&fig5(), &RaceSpec::first_of(1).unwrap(), &cfg).unwrap();
        assert_eq!(rep.samples.len(), 6);
        assert!(rep.samples.iter().all(|s| s.t_k > 0.0));
    }

    #[test]
    fn empirical_cdf_steps() {
        assert_eq!(empirical_cdf(&[2.0], &[1.0, 2.0, 3.0]), vec![0.0, 1.0, 1.0]);
        assert_eq!(empirical_cdf(&[5.0, 6.0, 7.0], &[0.0, 1.0, 4.9]), vec![0.0, 0.0, 0.0]);
        assert_eq!(empirical_cdf(&[1.0, 3.0], &[2.0]), vec![0.5]);
    }

    #[test]
    fn degenerate_profile_matches_homogeneous_stepping() {
        let p = fig5();
        let prof = SegmentProfile::homogeneous(&p).unwrap();
        let cfg = SimConfig::default().with_replications(200).stepped(0.02);
        let a = simulate_race(&p, &RaceSpec::first_of(1).unwrap(), &cfg).unwrap();
        let b = simulate_segmented_race(&prof, &RaceSpec::first_of(1).unwrap(), &cfg, None).unwrap();
        // identical seeds and identical code path
        assert!((a.t_k.mean - b.t_k.mean).abs() <= 2.0 * a.t_k.ci_half_width);
        assert_eq!(a.t_k.mean, b.t_k.mean);
    }

    #[test]
    fn attempt_fractions_are_consistent() {
        let prof = SegmentProfile::new(
            vec![
                Segment {
                    size: 2.0,
                    drift_b: -0.5,
                    diff_c: 1.0,
                    loss_lambda: 0.2,
                },
                Segment {
                    size: f64::INFINITY,
                    drift_b: 0.3,
                    diff_c: 0.5,
                    loss_lambda: 0.05,
                },
            ],
            0.1,
            0.1,
            3.0,
        )
        .unwrap();
        let st = simulate_attempts(&prof, &SimConfig::default().with_replications(2000).stepped(0.02)).unwrap();
        assert_eq!(st.successes + st.losses + st.timeouts + st.censored, 2000);
        assert!(st.successes > 0 && st.losses > 0 && st.timeouts > 0);
    }
}
