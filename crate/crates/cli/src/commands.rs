//! `eval` and `simulate`.

use diffsearch::analytic::{self, FixedPointOptions, Finiteness, Verdict};
use diffsearch::fpt;
use diffsearch::laplace::InversionOptions;
use diffsearch::model::{Config, RaceSpec, SearchParams, SegmentProfile};
use diffsearch::segments::{self, SegmentedSolution};
use diffsearch::sim::{self, RaceReport};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::output::{num, Run};
use crate::settings::Resolved;
use crate::{Classify, Common, Failure};

const SIM_KEYS: &[&str] = &["max_virtual_time"];

fn resolve(common: &Common) -> Result<(Resolved, Config), Failure> {
    let resolved = Resolved::build(Map::new(), common.config.as_deref(), &common.overrides()?, SIM_KEYS).config()?;
    let config: Config = resolved.parse().config()?;
    Ok((resolved, config))
}

fn max_virtual_time(resolved: &Resolved) -> Result<Option<f64>, Failure> {
    match resolved.map.get("max_virtual_time") {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v.as_f64().map(Some).ok_or_else(|| Failure::Config(anyhow::anyhow!("`max_virtual_time` must be a number"))),
    }
}

#[derive(Debug, Serialize)]
struct HomogeneousSummary {
    params: SearchParams,
    race: RaceSpec,
    finiteness: Finiteness,
    /// Closed-form `E[T_{1,N}]`.
    mean_time: f64,
    attraction_a: Option<f64>,
    /// Closed-form `E[J-_{1,N}]`.
    mean_energy_minus: Option<f64>,
    success_probability: Option<f64>,
    /// `E[T_{k,N}]` for independent searchers, from the order-statistic CDF.
    order_statistic_mean: Option<f64>,
    order_statistic_variance: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SegmentedSummary {
    race: RaceSpec,
    solution: Option<SegmentedSolution>,
    simulated: Option<SimSummary>,
}

fn eval_homogeneous(p: &SearchParams, race: &RaceSpec) -> Result<HomogeneousSummary, Failure> {
    let n = race.n_searchers;
    let finiteness = analytic::classify_finiteness(p, n);
    let mut s = HomogeneousSummary {
        params: *p,
        race: *race,
        finiteness,
        mean_time: f64::INFINITY,
        attraction_a: None,
        mean_energy_minus: None,
        success_probability: None,
        order_statistic_mean: None,
        order_statistic_variance: None,
    };
    if p.diff_c == 0.0 {
        s.mean_time = analytic::deterministic_limit_mean_time(p);
        return Ok(s);
    }
    s.success_probability = Some(fpt::attempt_success_probability(p).numeric()?);
    if finiteness.verdict == Verdict::Infinite {
        return Ok(s);
    }
    let fp = analytic::mean_time_fixed_point(p, n, &FixedPointOptions::default()).numeric()?;
    s.mean_time = fp.mean_time;
    s.attraction_a = Some(fp.attraction_a);
    s.mean_energy_minus = Some(analytic::mean_energy_first_success(p, n, fp.attraction_a).numeric()?);
    if p.curtailment() > 0.0 {
        let (m, v) = fpt::order_statistic_moments(p, race.k_required, n, &InversionOptions::default()).numeric()?;
        s.order_statistic_mean = Some(m);
        s.order_statistic_variance = Some(v);
    }
    Ok(s)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), num)
}

pub fn eval(common: &Common, json: bool) -> Result<(), Failure> {
    let (resolved, config) = resolve(common)?;
    let race = config.race().config()?;
    let value = if let Some(profile) = config.profile().config()? {
        let summary = eval_segmented(common, &resolved, &profile, &race)?;
        if !json {
            print_segmented(&summary);
        }
        serde_json::to_value(&summary).numeric()?
    } else {
        let p = config.search_params().config()?;
        let s = eval_homogeneous(&p, &race)?;
        if !json {
            say!("N = {}, k = {}", race.n_searchers, race.k_required);
            say!("finiteness            {:?} ({:?})", s.finiteness.verdict, s.finiteness.reason);
            say!("E[T_1,N]              {}", num(s.mean_time));
            say!("E[J-_1,N]             {}", opt(s.mean_energy_minus));
            say!("attraction a          {}", opt(s.attraction_a));
            say!("attempt success q     {}", opt(s.success_probability));
            say!("E[T_k,N] independent  {}", opt(s.order_statistic_mean));
        }
        serde_json::to_value(&s).numeric()?
    };
    if json {
        say!("{}", serde_json::to_string_pretty(&value).numeric()?);
    }
    if let Some(dir) = &common.out {
        let mut run = Run::new(dir, "eval");
        run.json("eval.json", &value).numeric()?;
        run.finish(resolved.echo(), None).numeric()?;
    }
    Ok(())
}

fn eval_segmented(common: &Common, resolved: &Resolved, profile: &SegmentProfile, race: &RaceSpec) -> Result<SegmentedSummary, Failure> {
    if race.n_searchers == 1 && race.k_required == 1 {
        let solution = segments::solve_segmented(profile, None).numeric()?;
        return Ok(SegmentedSummary {
            race: *race,
            solution: Some(solution),
            simulated: None,
        });
    }
    // no closed form for several searchers in a segmented medium
    let config = common.sim_config(10_000, max_virtual_time(resolved)?)?;
    let hint = segments::mean_time_segmented(profile).ok();
    let report = sim::simulate_segmented_race(profile, race, &config, hint).numeric()?;
    Ok(SegmentedSummary {
        race: *race,
        solution: None,
        simulated: Some(SimSummary::from(&report)),
    })
}

fn print_segmented(s: &SegmentedSummary) {
    if let Some(sol) = &s.solution {
        say!("attempt success q     {}", num(sol.success_probability));
        say!("attempt mean          {}", num(sol.attempt_mean));
        say!("loss probability      {}", num(sol.loss_probability));
        say!("E[T]                  {}", num(sol.mean_time));
        say!("solver                {:?}", sol.method);
    }
    if let Some(sim) = &s.simulated {
        say!("simulated (N = {}, k = {})", s.race.n_searchers, s.race.k_required);
        print_sim(sim);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub ci_half_width: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimSummary {
    pub t_k: Estimate,
    pub j_minus: Estimate,
    pub j_plus: Estimate,
    pub censored: usize,
    pub censored_fraction: f64,
    pub valid: bool,
    pub cap: f64,
    pub sim_config: sim::SimConfig,
}

impl From<&RaceReport> for SimSummary {
    fn from(r: &RaceReport) -> Self {
        let e = |s: &diffsearch::model::SimEstimate| Estimate {
            mean: s.mean,
            ci_half_width: s.ci_half_width,
            samples: s.samples,
        };
        SimSummary {
            t_k: e(&r.t_k),
            j_minus: e(&r.j_minus),
            j_plus: e(&r.j_plus),
            censored: r.censored,
            censored_fraction: r.censored_fraction,
            valid: r.valid,
            cap: r.cap,
            sim_config: r.config,
        }
    }
}

fn print_sim(s: &SimSummary) {
    say!("T_k    {} ± {}", num(s.t_k.mean), num(s.t_k.ci_half_width));
    say!("J-     {} ± {}", num(s.j_minus.mean), num(s.j_minus.ci_half_width));
    say!("J+     {} ± {}", num(s.j_plus.mean), num(s.j_plus.ci_half_width));
    say!("censored {} ({})", s.censored, num(s.censored_fraction));
    if !s.valid {
        warn!("warning: censoring above 0.1%, estimates are biased low");
    }
}

pub fn simulate(common: &Common) -> Result<(), Failure> {
    let (resolved, config) = resolve(common)?;
    let race = config.race().config()?;
    let sim_config = common.sim_config(10_000, max_virtual_time(&resolved)?)?;
    let report = match config.profile().config()? {
        Some(profile) => {
            let hint = segments::mean_time_segmented(&profile).ok();
            sim::simulate_segmented_race(&profile, &race, &sim_config, hint)
        }
        None => sim::simulate_race(&config.search_params().config()?, &race, &sim_config),
    }
    .numeric()?;
    let summary = SimSummary::from(&report);
    print_sim(&summary);
    let rows: Vec<Vec<String>> = report
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            vec![
                i.to_string(),
                num(s.t_k),
                num(s.j_minus),
                num(s.j_plus),
                s.interruptions.to_string(),
                s.censored.to_string(),
            ]
        })
        .collect();
    let mut run = Run::new(&common.out_dir(), "simulate");
    run.csv("samples.csv", &["replication", "t_k", "j_minus", "j_plus", "interruptions", "censored"], &rows).numeric()?;
    run.json("summary.json", &serde_json::json!({ "summary": summary, "config": resolved.echo() })).numeric()?;
    if !summary.valid {
        run.note(format!("censored fraction {} exceeds 0.1%", summary.censored_fraction));
    }
    run.finish(resolved.echo(), Some(sim_config.seed)).numeric()?;
    Ok(())
}
