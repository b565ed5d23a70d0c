//! `figure`: data behind each figure, with caption parameters as defaults.

use clap::ValueEnum;
use diffsearch::analytic::FixedPointOptions;
use diffsearch::exec::Execution;
use diffsearch::fpt;
use diffsearch::laplace::InversionOptions;
use diffsearch::model::{Config, SearchParams};
use diffsearch::optimize::{self, OptimizeOptions, Optimum, RateBracket};
use diffsearch::segments::{self, PhaseSweepSpec, PointStatus};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::output::{num, opt_num, Run};
use crate::settings::{object, Resolved};
use crate::{Classify, Common, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig7,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Panel {
    A,
    B,
}

pub fn run(common: &Common, id: FigureId, panel: Option<Panel>) -> Result<(), Failure> {
    match id {
        FigureId::Fig2 => fig2(common, panel),
        FigureId::Fig3 => fig3(common),
        FigureId::Fig4 => fig4(common),
        FigureId::Fig5 => fig5(common),
        FigureId::Fig7 => fig7(common),
    }
}

fn params_of(resolved: &Resolved) -> Result<SearchParams, Failure> {
    resolved.parse::<Config>().config()?.search_params().config()
}

fn timeout_rates(timeout_min: f64, timeout_max: f64, points: usize) -> Result<Vec<f64>, Failure> {
    if points == 0 {
        return Err(Failure::Config(anyhow::anyhow!("`points` must be >= 1")));
    }
    let bracket = RateBracket::new(1.0 / timeout_max, 1.0 / timeout_min).config()?;
    Ok(bracket.log_grid(points))
}

#[derive(Debug, Deserialize)]
struct LocusSettings {
    #[serde(rename = "N_list")]
    n_list: Vec<usize>,
    timeout_min: f64,
    timeout_max: f64,
    points: usize,
}

const LOCUS_KEYS: &[&str] = &["N_list", "timeout_min", "timeout_max", "points"];

fn fig2(common: &Common, panel: Option<Panel>) -> Result<(), Failure> {
    let panels: Vec<Panel> = panel.map_or(vec![Panel::A, Panel::B], |p| vec![p]);
    let mut run = Run::new(&common.out_dir(), "figure fig2");
    let mut echo = Map::new();
    for panel in panels {
        let (name, b, lambda) = match panel {
            Panel::A => ("fig2a", 0.2, 0.01),
            Panel::B => ("fig2b", 0.0, 0.15),
        };
        let defaults = object([
            ("b", json!(b)),
            ("c", json!(1.0)),
            ("lambda", json!(lambda)),
            ("r", json!(0.1)),
            ("mu", json!(0.05)),
            ("D", json!(10.0)),
            ("N_list", json!([1, 2, 5, 10])),
            ("timeout_min", json!(1.0)),
            ("timeout_max", json!(1e4)),
            ("points", json!(200)),
        ]);
        let resolved = Resolved::build(defaults, common.config.as_deref(), &common.overrides()?, LOCUS_KEYS).config()?;
        let s: LocusSettings = resolved.parse().config()?;
        let p = params_of(&resolved)?;
        let rates = timeout_rates(s.timeout_min, s.timeout_max, s.points)?;
        let mut rows = Vec::new();
        let mut failed = 0;
        for &n in &s.n_list {
            if n == 0 {
                return Err(Failure::Config(anyhow::anyhow!("`N_list` entries must be >= 1")));
            }
            for (r, point) in rates.iter().zip(optimize::tradeoff_locus(&p, n, &rates, &FixedPointOptions::default(), common.execution())) {
                let (t, j, status) = match point {
                    Ok(pt) => (num(pt.mean_time), num(pt.mean_energy_minus), "ok".to_string()),
                    Err(e) => {
                        failed += 1;
                        ("NA".into(), "NA".into(), e.to_string())
                    }
                };
                rows.push(vec![n.to_string(), num(1.0 / r), t, j, status]);
            }
        }
        if failed > 0 {
            run.flag_partial(format!("{name}: {failed} points failed"));
        }
        run.csv(&format!("{name}.csv"), &["N", "timeout_mean", "mean_time", "mean_energy_minus", "status"], &rows).numeric()?;
        echo.insert(name.into(), resolved.echo());
    }
    run.finish(Value::Object(echo), None).numeric()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct EnergySettings {
    #[serde(rename = "N_list")]
    n_list: Vec<usize>,
    k: usize,
    timeout_min: f64,
    timeout_max: f64,
    points: usize,
}

fn fig3(common: &Common) -> Result<(), Failure> {
    let defaults = object([
        ("b", json!(0.15)),
        ("c", json!(1.25)),
        ("lambda", json!(0.001)),
        ("r", json!(0.1)),
        ("mu", json!(0.1)),
        ("D", json!(10.0)),
        ("k", json!(1)),
        ("N_list", json!([1, 2, 4, 8])),
        ("timeout_min", json!(10.0)),
        ("timeout_max", json!(1000.0)),
        ("points", json!(15)),
    ]);
    let resolved = Resolved::build(defaults, common.config.as_deref(), &common.overrides()?, LOCUS_KEYS).config()?;
    let s: EnergySettings = resolved.parse().config()?;
    let p = params_of(&resolved)?;
    let rates = timeout_rates(s.timeout_min, s.timeout_max, s.points)?;
    let config = common.sim_config(10_000, None)?;
    if s.n_list.iter().any(|&n| n < s.k) || s.k == 0 {
        return Err(Failure::Config(anyhow::anyhow!("need 1 <= k <= N for every entry of `N_list`")));
    }
    let table = optimize::energy_vs_timeout(&p, s.k, &s.n_list, &rates, &config).numeric()?;
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.k.to_string(),
                num(r.timeout_mean),
                num(r.j_minus),
                num(r.j_minus_ci),
                num(r.j_plus),
                num(r.j_plus_ci),
                num(r.censored_fraction),
            ]
        })
        .collect();
    let mut run = Run::new(&common.out_dir(), "figure fig3");
    run.csv("fig3.csv", &["N", "k", "timeout_mean", "j_minus", "j_minus_ci", "j_plus", "j_plus_ci", "censored_fraction"], &rows)
        .numeric()?;
    if table.iter().any(|r| r.censored_fraction > diffsearch::sim::MAX_CENSORED_FRACTION) {
        run.note("some points exceed the censoring limit".into());
    }
    run.finish(resolved.echo(), Some(config.seed)).numeric()?;
    Ok(())
}

fn fig4(common: &Common) -> Result<(), Failure> {
    let defaults = object([
        ("b", json!(0.0)),
        ("c", json!(1.0)),
        ("lambda", json!(0.0025)),
        ("r", json!(0.05)),
        ("mu", json!(0.1)),
        ("D", json!(10.0)),
        ("k", json!(3)),
        ("N_list", json!([3, 4, 6, 8, 12, 16])),
        ("timeout_min", json!(1.0)),
        ("timeout_max", json!(1e4)),
        ("points", json!(32)),
    ]);
    let resolved = Resolved::build(defaults, common.config.as_deref(), &common.overrides()?, LOCUS_KEYS).config()?;
    let s: EnergySettings = resolved.parse().config()?;
    let p = params_of(&resolved)?;
    let bracket = RateBracket::new(1.0 / s.timeout_max, 1.0 / s.timeout_min).config()?;
    let opts = OptimizeOptions {
        prescan_points: s.points.max(3),
        sim: common.sim_config(4_000, None)?,
        ..OptimizeOptions::default()
    };
    if s.n_list.iter().any(|&n| n < s.k) || s.k == 0 {
        return Err(Failure::Config(anyhow::anyhow!("need 1 <= k <= N for every entry of `N_list`")));
    }
    let table = optimize::min_curves_vs_n(&p, s.k, &s.n_list, &bracket, &opts).numeric()?;
    let flag = |o: &Optimum| format!("{:?}", o.flag);
    let minima: Vec<Vec<String>> = table
        .iter()
        .map(|r| vec![r.n.to_string(), r.k.to_string(), num(r.time.value), num(r.energy_minus.value), num(r.energy_plus.value)])
        .collect();
    let timeouts: Vec<Vec<String>> = table
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.k.to_string(),
                num(r.time.timeout_mean),
                flag(&r.time),
                num(r.energy_minus.timeout_mean),
                flag(&r.energy_minus),
                num(r.energy_plus.timeout_mean),
                flag(&r.energy_plus),
            ]
        })
        .collect();
    let mut run = Run::new(&common.out_dir(), "figure fig4");
    run.csv("fig4a.csv", &["N", "k", "min_time", "min_energy_minus", "min_energy_plus"], &minima).numeric()?;
    run.csv(
        "fig4b.csv",
        &["N", "k", "timeout_time", "flag_time", "timeout_energy_minus", "flag_energy_minus", "timeout_energy_plus", "flag_energy_plus"],
        &timeouts,
    )
    .numeric()?;
    run.note("each objective is minimised over the timeout separately".into());
    run.finish(resolved.echo(), Some(opts.sim.seed)).numeric()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct SearchersSettings {
    k: usize,
    #[serde(rename = "B_list")]
    b_list: Vec<f64>,
}

fn fig5(common: &Common) -> Result<(), Failure> {
    let defaults = object([
        ("b", json!(0.0)),
        ("c", json!(1.0)),
        ("lambda", json!(0.0025)),
        ("r", json!(1.0 / 78.0)),
        ("mu", json!(0.1)),
        ("D", json!(10.0)),
        ("k", json!(3)),
        ("B_list", json!((1..=10).map(|i| 100.0 * i as f64).collect::<Vec<_>>())),
    ]);
    let resolved = Resolved::build(defaults, common.config.as_deref(), &common.overrides()?, &["B_list"]).config()?;
    let s: SearchersSettings = resolved.parse().config()?;
    let p = params_of(&resolved)?;
    if s.k == 0 || s.b_list.iter().any(|b| !(*b > 0.0)) {
        return Err(Failure::Config(anyhow::anyhow!("need k >= 1 and every B > 0")));
    }
    let mut run = Run::new(&common.out_dir(), "figure fig5");
    let mut rows = Vec::new();
    for &b in &s.b_list {
        match fpt::searchers_table(&p, s.k, &[b], &InversionOptions::default(), Execution::Sequential) {
            Ok(t) => rows.push(vec![num(b), s.k.to_string(), t[0].n_exact.to_string(), t[0].n_asymptotic.to_string()]),
            Err(e) => {
                run.flag_partial(format!("B = {b}: {e}"));
                rows.push(vec![num(b), s.k.to_string(), "NA".into(), "NA".into()]);
            }
        }
    }
    run.csv("fig5.csv", &["B", "k", "N_exact", "N_asymptotic"], &rows).numeric()?;
    run.note("N_exact is the smallest N with P[T_k,N <= B] >= 0.5".into());
    run.finish(resolved.echo(), None).numeric()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct PhaseSettings {
    rho_grid: Vec<f64>,
    epsilon_list: Vec<f64>,
    m: usize,
    segment_size: f64,
    c: f64,
    r: f64,
    mu: f64,
    #[serde(rename = "D")]
    d: f64,
}

fn fig7(common: &Common) -> Result<(), Failure> {
    let reference = PhaseSweepSpec::reference();
    let defaults = object([
        ("rho_grid", json!(reference.rho_grid)),
        ("epsilon_list", json!(reference.epsilon_list)),
        ("m", json!(reference.m)),
        ("segment_size", json!(reference.segment_size)),
        ("c", json!(reference.diff_c)),
        ("r", json!(reference.timeout_r)),
        ("mu", json!(reference.relaunch_mu)),
        ("D", json!(reference.distance_d)),
    ]);
    let keys = ["rho_grid", "epsilon_list", "m", "segment_size"];
    let resolved = Resolved::build(defaults, common.config.as_deref(), &common.overrides()?, &keys).config()?;
    let s: PhaseSettings = resolved.parse().config()?;
    let spec = PhaseSweepSpec {
        rho_grid: s.rho_grid,
        epsilon_list: s.epsilon_list,
        m: s.m,
        segment_size: s.segment_size,
        diff_c: s.c,
        timeout_r: s.r,
        relaunch_mu: s.mu,
        distance_d: s.d,
    };
    // surface configuration mistakes before sweeping
    if let (Some(&rho), Some(&eps)) = (spec.rho_grid.first(), spec.epsilon_list.first()) {
        spec.profile(rho, eps).config()?;
    }
    let table = segments::phase_sweep(&spec, common.execution());
    let mut run = Run::new(&common.out_dir(), "figure fig7");
    let mut failed = 0;
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| {
            let status = match &r.status {
                PointStatus::Ok => "ok".to_string(),
                PointStatus::Infinite => "infinite".to_string(),
                PointStatus::Error(e) => {
                    failed += 1;
                    format!("error: {e}")
                }
            };
            vec![num(r.rho), num(r.epsilon), opt_num(r.mean_time), status]
        })
        .collect();
    if failed > 0 {
        run.flag_partial(format!("{failed} grid points failed"));
    }
    run.csv("fig7.csv", &["rho", "epsilon", "mean_time", "status"], &rows).numeric()?;
    run.note("single searcher, segment 1 adjacent to the object".into());
    run.finish(resolved.echo(), None).numeric()?;
    Ok(())
}
