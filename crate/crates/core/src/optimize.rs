//! Timeout optimisation: time-energy loci, energy-versus-timeout curves and
//! minimum achievable time and energy as functions of `N`.
//!
//! Objectives are functions of the timeout rate `r` and are minimised over
//! `x = ln(1/r)`. Deterministic engines are used where available: the
//! fixed-point closed forms for `k = 1` time and `J-`, and order-statistic
//! integration for `k > 1` time. Remaining energies come from simulation
//! with a fixed seed, so every candidate `r` sees the same random numbers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{self, AnalyticError, FixedPointOptions};
use crate::exec::{map_indexed, Execution};
use crate::fpt::{self, FptError};
use crate::laplace::InversionOptions;
use crate::model::{RaceSpec, SearchParams, Stopping, ValidationError};
use crate::sim::{self, SimConfig, SimError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("rate bracket must satisfy 0 < lo < hi, got [{lo}, {hi}]")]
    BadBracket { lo: f64, hi: f64 },
    #[error("objective is not finite anywhere in the bracket")]
    NoFiniteValue,
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Fpt(#[from] FptError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    MeanTime,
    MeanEnergyMinus,
    MeanEnergyPlus,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::MeanTime, Objective::MeanEnergyMinus, Objective::MeanEnergyPlus];

    fn index(self) -> usize {
        self as usize
    }
}

/// Search interval for the timeout rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBracket {
    pub lo: f64,
    pub hi: f64,
}

impl RateBracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self, OptimizeError> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(OptimizeError::BadBracket { lo, hi });
        }
        Ok(RateBracket { lo, hi })
    }

    /// `n` rates log-spaced from `hi` down to `lo` (timeouts increasing).
    pub fn log_grid(&self, n: usize) -> Vec<f64> {
        let (a, b) = (-self.hi.ln(), -self.lo.ln());
        match n {
            0 => vec![],
            1 => vec![(-(a + b) / 2.0).exp()],
            _ => (0..n).map(|i| (-(a + (b - a) * i as f64 / (n - 1) as f64)).exp()).collect(),
        }
    }
}

impl Default for RateBracket {
    /// Mean timeouts from 1 to 10^4 time units.
    fn default() -> Self {
        RateBracket { lo: 1e-4, hi: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimumFlag {
    Interior,
    /// The best value sits on the bracket edge; the edge is returned.
    NoMinimumInBracket,
    /// The objective is constant; the bracket midpoint is returned.
    DegenerateFlat,
    /// The pre-scan found several local minima; the global scan minimum was refined.
    Multimodal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub objective: Objective,
    pub rate: f64,
    pub timeout_mean: f64,
    pub value: f64,
    pub flag: OptimumFlag,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    /// Absolute tolerance on `ln(1/r)`.
    pub tolerance: f64,
    pub prescan_points: usize,
    /// Used by simulation-backed objectives; its seed is shared by all candidates.
    pub sim: SimConfig,
    pub inversion: InversionOptions,
    pub fixed_point: FixedPointOptions,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            tolerance: 1e-4,
            prescan_points: 32,
            sim: SimConfig::default().with_replications(20_000),
            inversion: InversionOptions::default(),
            fixed_point: FixedPointOptions::default(),
        }
    }
}

/// Evaluates objectives at a timeout rate, simulating only when needed.
struct Evaluator<'a> {
    params: &'a SearchParams,
    race: RaceSpec,
    opts: &'a OptimizeOptions,
}

impl Evaluator<'_> {
    fn needs_sim(&self, which: &[Objective]) -> bool {
        which.iter().any(|o| match o {
            Objective::MeanTime => false,
            Objective::MeanEnergyMinus => self.race.k_required > 1,
            Objective::MeanEnergyPlus => self.race.n_searchers > 1,
        })
    }

    /// Values of `which` at rate `r`, `INFINITY` where undefined.
    fn eval(&self, r: f64, which: &[Objective]) -> Result<[f64; 3], OptimizeError> {
        let p = self.params.with_timeout_rate(r)?;
        let (n, k) = (self.race.n_searchers, self.race.k_required);
        let mut out = [f64::NAN; 3];
        let report = if self.needs_sim(which) {
            let race = RaceSpec::new(n, k, Stopping::StopAll)?;
            match sim::simulate_race(&p, &race, &self.opts.sim) {
                Ok(rep) => Some(rep),
                Err(SimError::TimeCapExceeded { .. }) => None,
                Err(e) => return Err(e.into()),
            }
        } else {
            None
        };
        let fixed_point = if k == 1 && which.iter().any(|o| *o != Objective::MeanEnergyPlus || n == 1) {
            match analytic::mean_time_fixed_point(&p, n, &self.opts.fixed_point) {
                Ok(fp) => Some(fp),
                Err(AnalyticError::Overflow { .. }) => None,
                Err(e) => return Err(e.into()),
            }
        } else {
            None
        };
        let from_report = |f: fn(&sim::RaceReport) -> f64| report.as_ref().map_or(f64::INFINITY, f);
        for &o in which {
            out[o.index()] = match o {
                Objective::MeanTime if k == 1 => fixed_point.map_or(f64::INFINITY, |fp| fp.mean_time),
                Objective::MeanTime => fpt::order_statistic_moments(&p, k, n, &self.opts.inversion)?.0,
                Objective::MeanEnergyMinus | Objective::MeanEnergyPlus if k == 1 && (o == Objective::MeanEnergyMinus || n == 1) => match fixed_point {
                    Some(fp) => analytic::mean_energy_first_success(&p, n, fp.attraction_a).unwrap_or(f64::INFINITY),
                    None => f64::INFINITY,
                },
                Objective::MeanEnergyMinus => from_report(|r| r.j_minus.mean),
                Objective::MeanEnergyPlus => from_report(|r| r.j_plus.mean),
            };
        }
        Ok(out)
    }
}

fn golden_section<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64, usize), OptimizeError>
where
    F: FnMut(f64) -> Result<f64, OptimizeError>,
{
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    let mut evals = 2;
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
        evals += 1;
    }
    Ok(if fc <= fd { (c, fc, evals) } else { (d, fd, evals) })
}

/// Refines a pre-scan `(x, value)` table for one objective.
fn refine<F>(scan: &[(f64, f64)], objective: Objective, tol: f64, mut f: F) -> Result<Optimum, OptimizeError>
where
    F: FnMut(f64) -> Result<f64, OptimizeError>,
{
    let finite: Vec<usize> = (0..scan.len()).filter(|&i| scan[i].1.is_finite()).collect();
    if finite.is_empty() {
        return Err(OptimizeError::NoFiniteValue);
    }
    let at = |x: f64, value: f64, flag: OptimumFlag, evaluations: usize| Optimum {
        objective,
        rate: (-x).exp(),
        timeout_mean: x.exp(),
        value,
        flag,
        evaluations,
    };
    let (min, max) = finite.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(scan[i].1), hi.max(scan[i].1)));
    if max - min <= 1e-12 * min.abs() && finite.len() == scan.len() {
        let mid = 0.5 * (scan[0].0 + scan[scan.len() - 1].0);
        return Ok(at(mid, min, OptimumFlag::DegenerateFlat, scan.len()));
    }
    let best = finite.iter().copied().min_by(|&i, &j| scan[i].1.total_cmp(&scan[j].1)).unwrap();
    let last = scan.len() - 1;
    if best == 0 || best == last {
        return Ok(at(scan[best].0, scan[best].1, OptimumFlag::NoMinimumInBracket, scan.len()));
    }
    let local_minima = (1..last).filter(|&i| scan[i].1 < scan[i - 1].1 && scan[i].1 <= scan[i + 1].1).count();
    let (x, value, evals) = golden_section(&mut f, scan[best - 1].0, scan[best + 1].0, tol)?;
    let flag = if local_minima > 1 { OptimumFlag::Multimodal } else { OptimumFlag::Interior };
    Ok(if value <= scan[best].1 {
        at(x, value, flag, scan.len() + evals)
    } else {
        at(scan[best].0, scan[best].1, flag, scan.len() + evals)
    })
}

/// Lower bound on `E[J-]` and `E[J+]` at rate `r`.
///
/// Energy counts attempt time only, and the `k` successful searchers each
/// contribute their whole active time to success. Active time to success is
/// distributed as the first passage of a searcher with no loss, kill rate
/// `lambda + r` and instant relaunch, so the bound is the sum of the first
/// `k` order-statistic means of that passage time.
fn energy_lower_bound(ev: &Evaluator, r: f64) -> Result<f64, OptimizeError> {
    let p = ev.params;
    let active = SearchParams::new(p.drift_b, p.diff_c, 0.0, p.loss_lambda + r, INSTANT_RELAUNCH, p.distance_d)?;
    let n = ev.race.n_searchers;
    (1..=ev.race.k_required).try_fold(0.0, |acc, j| Ok(acc + fpt::order_statistic_moments(&active, j, n, &ev.opts.inversion)?.0))
}

/// Relaunch rate standing in for an instant relaunch.
const INSTANT_RELAUNCH: f64 = 1e12;

/// Evaluates `which` on a log grid. Simulated objectives are skipped, and
/// reported as infinite, where the energy lower bound already exceeds the
/// best simulated value; grid points are simulated in order of their bound.
fn prescan(ev: &Evaluator, bracket: &RateBracket, which: &[Objective]) -> Result<Vec<(f64, [f64; 3])>, OptimizeError> {
    let n = ev.opts.prescan_points.max(3);
    let (a, b) = (-bracket.hi.ln(), -bracket.lo.ln());
    let xs: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
    let simulated: Vec<Objective> = which.iter().copied().filter(|o| ev.needs_sim(&[*o])).collect();
    let direct: Vec<Objective> = which.iter().copied().filter(|o| !simulated.contains(o)).collect();
    let mut out: Vec<(f64, [f64; 3])> = xs.iter().map(|&x| Ok((x, ev.eval((-x).exp(), &direct)?))).collect::<Result<_, OptimizeError>>()?;
    if simulated.is_empty() || ev.params.diff_c == 0.0 || ev.params.distance_d == 0.0 {
        for (x, v) in out.iter_mut() {
            let s = ev.eval((-*x).exp(), &simulated)?;
            simulated.iter().for_each(|o| v[o.index()] = s[o.index()]);
        }
        return Ok(out);
    }
    let bounds: Vec<f64> = xs.iter().map(|&x| energy_lower_bound(ev, (-x).exp())).collect::<Result<_, _>>()?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| bounds[i].total_cmp(&bounds[j]));
    let mut best = [f64::INFINITY; 3];
    for i in order {
        let (x, v) = &mut out[i];
        if simulated.iter().all(|o| bounds[i] >= best[o.index()]) {
            simulated.iter().for_each(|o| v[o.index()] = f64::INFINITY);
            continue;
        }
        let s = ev.eval((-*x).exp(), &simulated)?;
        for o in &simulated {
            v[o.index()] = s[o.index()];
            best[o.index()] = best[o.index()].min(s[o.index()]);
        }
    }
    Ok(out)
}

/// Timeout rate minimising `objective` for the race.
pub fn optimal_timeout(params: &SearchParams, race: &RaceSpec, objective: Objective, bracket: &RateBracket, opts: &OptimizeOptions) -> Result<Optimum, OptimizeError> {
    let ev = Evaluator {
        params,
        race: *race,
        opts,
    };
    let which = [objective];
    let scan: Vec<(f64, f64)> = prescan(&ev, bracket, &which)?.into_iter().map(|(x, v)| (x, v[objective.index()])).collect();
    refine(&scan, objective, opts.tolerance, |x| Ok(ev.eval((-x).exp(), &which)?[objective.index()]))
}

/// Objective values on an arbitrary rate grid (brute-force oracle).
pub fn objective_on_grid(params: &SearchParams, race: &RaceSpec, objective: Objective, rates: &[f64], opts: &OptimizeOptions) -> Result<Vec<f64>, OptimizeError> {
    let ev = Evaluator {
        params,
        race: *race,
        opts,
    };
    rates.iter().map(|&r| Ok(ev.eval(r, &[objective])?[objective.index()])).collect()
}

/// One point of the time-energy locus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub timeout_mean: f64,
    pub mean_time: f64,
    pub mean_energy_minus: f64,
    /// Present only when simulated.
    pub mean_energy_plus: Option<f64>,
}

/// `E[T_{1,N}]` and `E[J-_{1,N}]` along a grid of timeout rates.
pub fn tradeoff_locus(params: &SearchParams, n: usize, rates: &[f64], opts: &FixedPointOptions, exec: Execution) -> Vec<Result<TradeoffPoint, AnalyticError>> {
    map_indexed(rates.len(), exec, |i| {
        let r = rates[i];
        let p = params.with_timeout_rate(r)?;
        let fp = analytic::mean_time_fixed_point(&p, n, opts)?;
        Ok(TradeoffPoint {
            timeout_mean: 1.0 / r,
            mean_time: fp.mean_time,
            mean_energy_minus: analytic::mean_energy_first_success(&p, n, fp.attraction_a)?,
            mean_energy_plus: None,
        })
    })
}

/// Simulated energies at one `(N, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub n: usize,
    pub k: usize,
    pub timeout_mean: f64,
    pub j_minus: f64,
    pub j_minus_ci: f64,
    pub j_plus: f64,
    pub j_plus_ci: f64,
    pub censored_fraction: f64,
}

/// Energy with and without stopping over a grid of `N` and timeout rates.
/// Rows are `N`-major; every point uses `config.seed`.
pub fn energy_vs_timeout(params: &SearchParams, k: usize, n_list: &[usize], rates: &[f64], config: &SimConfig) -> Result<Vec<EnergyRow>, OptimizeError> {
    let mut rows = Vec::with_capacity(n_list.len() * rates.len());
    for &n in n_list {
        let race = RaceSpec::new(n, k, Stopping::StopAll)?;
        for &r in rates {
            let rep = sim::simulate_race(&params.with_timeout_rate(r)?, &race, config)?;
            rows.push(EnergyRow {
                n,
                k,
                timeout_mean: 1.0 / r,
                j_minus: rep.j_minus.mean,
                j_minus_ci: rep.j_minus.ci_half_width,
                j_plus: rep.j_plus.mean,
                j_plus_ci: rep.j_plus.ci_half_width,
                censored_fraction: rep.censored_fraction,
            });
        }
    }
    Ok(rows)
}

/// Per-objective optima for one `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinCurveRow {
    pub n: usize,
    pub k: usize,
    pub time: Optimum,
    pub energy_minus: Optimum,
    pub energy_plus: Optimum,
}

/// Minimum achievable `E[T_{k,N}]`, `E[J-]` and `E[J+]` and their optimal
/// timeouts, each minimised separately.
pub fn min_curves_vs_n(params: &SearchParams, k: usize, n_list: &[usize], bracket: &RateBracket, opts: &OptimizeOptions) -> Result<Vec<MinCurveRow>, OptimizeError> {
    n_list
        .iter()
        .map(|&n| {
            let race = RaceSpec::new(n, k, Stopping::StopAll)?;
            let ev = Evaluator {
                params,
                race,
                opts,
            };
            let scan = prescan(&ev, bracket, &Objective::ALL)?;
            let mut optima = Objective::ALL.iter().map(|&o| {
                let column: Vec<(f64, f64)> = scan.iter().map(|(x, v)| (*x, v[o.index()])).collect();
                refine(&column, o, opts.tolerance, |x| Ok(ev.eval((-x).exp(), &[o])?[o.index()]))
            });
            Ok(MinCurveRow {
                n,
                k,
                time: optima.next().unwrap()?,
                energy_minus: optima.next().unwrap()?,
                energy_plus: optima.next().unwrap()?,
            })
        })
        .collect()
}
