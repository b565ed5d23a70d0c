//! Acceptance criteria. Prints one PASS or FAIL line per criterion, with
//! indented detail lines, and exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use diffsearch::analytic::{self, FinitenessReason, FixedPointOptions, Verdict};
use diffsearch::exec::Execution;
use diffsearch::fpt;
use diffsearch::laplace::InversionOptions;
use diffsearch::model::{RaceFixedPoint, RaceSpec, SearchParams, Segment, SegmentProfile, SimEstimate, Stopping};
use diffsearch::optimize::{self, OptimizeOptions, RateBracket};
use diffsearch::segments::{self, PhaseSweepSpec, PointStatus};
use diffsearch::sim::{self, RaceReport, SimConfig};
use diffsearch_validation::{Caption, ALL, FIG3, FIG4, FIG5};

type Log = Vec<String>;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Deviation of `value` from a simulated mean, in CI half-widths.
fn half_widths(report: &SimEstimate, value: f64) -> f64 {
    (value - report.mean) / report.ci_half_width
}

/// Fixed point, closed-form energy and a race simulation for one `(caption, N)`.
struct Agreement {
    n: usize,
    fixed_point: RaceFixedPoint,
    energy: f64,
    report: RaceReport,
}

struct CaptionRun {
    caption: Caption,
    rate: f64,
    seconds: f64,
    rows: Vec<Agreement>,
}

const N_LIST: [usize; 4] = [1, 2, 5, 10];
const AGREEMENT_REPLICATIONS: usize = 100_000;

fn caption_runs() -> Vec<CaptionRun> {
    ALL.iter()
        .map(|caption| {
            let started = Instant::now();
            let rate = caption.rate();
            let p = caption.at(rate);
            let config = SimConfig::default().with_replications(AGREEMENT_REPLICATIONS);
            let rows = N_LIST
                .iter()
                .map(|&n| {
                    let fixed_point = analytic::mean_time_fixed_point(&p, n, &FixedPointOptions::default()).unwrap();
                    let energy = analytic::mean_energy_first_success(&p, n, fixed_point.attraction_a).unwrap();
                    let report = sim::simulate_race(&p, &RaceSpec::first_of(n).unwrap(), &config).unwrap();
                    Agreement { n, fixed_point, energy, report }
                })
                .collect();
            CaptionRun {
                caption: *caption,
                rate,
                seconds: started.elapsed().as_secs_f64(),
                rows,
            }
        })
        .collect()
}

fn agreement(runs: &[CaptionRun], log: &mut Log, pick: fn(&Agreement) -> (f64, &SimEstimate)) -> bool {
    let mut ok = true;
    for run in runs {
        let within_budget = run.seconds <= 300.0;
        ok &= within_budget;
        for row in &run.rows {
            let (value, estimate) = pick(row);
            let pass = row.report.valid && estimate.covers(value, 3.0);
            ok &= pass;
            log.push(format!(
                "{} {:5} r={:.6} N={:2}: closed form {:.4}, simulated {:.4} ± {:.4} ({:+.2} half-widths; set took {:.1} s)",
                if pass { "ok  " } else { "miss" },
                run.caption.name,
                run.rate,
                row.n,
                value,
                estimate.mean,
                estimate.ci_half_width,
                half_widths(estimate, value),
                run.seconds,
            ));
        }
    }
    ok
}

fn criterion_1(runs: &[CaptionRun], log: &mut Log) -> bool {
    agreement(runs, log, |a| (a.fixed_point.mean_time, &a.report.t_k))
}

fn criterion_2(runs: &[CaptionRun], log: &mut Log) -> bool {
    agreement(runs, log, |a| (a.energy, &a.report.j_minus))
}

fn criterion_3(log: &mut Log) -> bool {
    let p = FIG5.params();
    let report = sim::simulate_race(&p, &RaceSpec::first_of(1).unwrap(), &SimConfig::default().with_replications(100_000)).unwrap();
    let times = report.times();
    let mean = analytic::mean_time(&p, 1, 0.0).unwrap();
    let grid: Vec<f64> = (1..=200).map(|i| 8.0 * mean * i as f64 / 200.0).collect();
    let g = fpt::cdf_g(&p, &grid, &InversionOptions::default(), Execution::Parallel).unwrap();
    let distance = sim::kolmogorov_distance(&g.g_cdf, &sim::empirical_cdf(&times, &grid));
    log.push(format!("{} samples, 200-point grid to {:.1}: Kolmogorov distance {distance:.5}", times.len(), grid[199]));
    report.valid && distance <= 0.02
}

fn criterion_4(log: &mut Log) -> bool {
    let deadlines: Vec<f64> = (1..=10).map(|i| 100.0 * i as f64).collect();
    let rows = fpt::searchers_table(&FIG5.params(), 3, &deadlines, &InversionOptions::default(), Execution::Parallel).unwrap();
    let mut ok = true;
    for row in rows {
        let limit = if row.n_exact >= 5 { 2 } else { 3 };
        let diff = row.n_asymptotic.abs_diff(row.n_exact);
        ok &= diff <= limit;
        log.push(format!("B={:6.0}: G(B)={:.5}, exact {:3}, asymptotic {:3}", row.deadline, row.g_at_deadline, row.n_exact, row.n_asymptotic));
    }
    ok
}

fn criterion_5(log: &mut Log) -> bool {
    let cases = [
        ("c=0, b<0", SearchParams::new(-0.5, 0.0, 0.0, 0.0, 0.05, 10.0), 1, Verdict::Finite, FinitenessReason::DeterministicTowardObject),
        ("c=0, b>=0", SearchParams::new(0.1, 0.0, 0.01, 0.1, 0.05, 10.0), 1, Verdict::Infinite, FinitenessReason::DeterministicAwayOrZeroDrift),
        ("c>0, b>0, curtailed", SearchParams::new(0.5, 1.0, 0.0, 0.2, 0.05, 10.0), 1, Verdict::Finite, FinitenessReason::RandomisedWithCurtailment),
        ("c>0, b>=0, uncurtailed", SearchParams::new(0.5, 1.0, 0.0, 0.0, 0.05, 10.0), 1, Verdict::Infinite, FinitenessReason::NoCurtailment),
    ];
    let mut ok = true;
    for (name, p, n, verdict, reason) in cases {
        let got = analytic::classify_finiteness(&p.unwrap(), n);
        let pass = got.verdict == verdict && got.reason == reason;
        ok &= pass;
        log.push(format!("{name}: {:?} ({:?})", got.verdict, got.reason));
    }
    for b in [-0.2, -0.5, -1.0] {
        let limit = analytic::deterministic_limit_mean_time(&SearchParams::new(b, 0.0, 0.01, 0.1, 0.05, 10.0).unwrap());
        let near = analytic::mean_time(&SearchParams::new(b, 1e-6, 0.01, 0.1, 0.05, 10.0).unwrap(), 1, 0.0).unwrap();
        let err = rel(near, limit);
        ok &= err <= 1e-3;
        log.push(format!("b={b}: limit {limit:.6}, closed form at c=1e-6 {near:.6} (relative {err:.2e})"));
    }
    ok
}

fn criterion_6(log: &mut Log) -> bool {
    let mut ok = true;
    for caption in ALL {
        let p = caption.params();
        let seg = segments::mean_time_segmented(&SegmentProfile::homogeneous(&p).unwrap()).unwrap();
        let closed = analytic::mean_time(&p, 1, 0.0).unwrap();
        let err = rel(seg, closed);
        ok &= err <= 1e-8;
        log.push(format!("single segment {}: {seg:.8} vs {closed:.8} (relative {err:.2e})", caption.name));
    }
    let medium = PhaseSweepSpec::reference().profile(1.0, 0.5).unwrap();
    let base = segments::mean_time_segmented(&medium).unwrap();
    for (k, frac) in [(0, 0.37), (6, 0.5), (19, 2.5)] {
        let refined = segments::mean_time_segmented(&medium.refined(k, frac).unwrap()).unwrap();
        let err = rel(refined, base);
        ok &= err <= 1e-9;
        log.push(format!("refining segment {k} at {frac}: {refined:.10} vs {base:.10} (relative {err:.2e})"));
    }
    let two = SegmentProfile::new(
        vec![
            Segment {
                size: 4.0,
                drift_b: -0.3,
                diff_c: 1.0,
                loss_lambda: 0.02,
            },
            Segment {
                size: f64::INFINITY,
                drift_b: 0.1,
                diff_c: 1.0,
                loss_lambda: 0.005,
            },
        ],
        0.05,
        0.1,
        8.0,
    )
    .unwrap();
    let q = segments::killed_success_probability(&two).unwrap();
    let stats = sim::simulate_attempts(&two, &SimConfig::default().stepped(1e-2).with_replications(100_000)).unwrap();
    let frac = stats.success_fraction();
    let sigma = (q * (1.0 - q) / stats.trials as f64).sqrt();
    let pass = stats.censored == 0 && (frac - q).abs() <= 3.0 * sigma;
    ok &= pass;
    log.push(format!("two segments: q = {q:.5}, simulated {frac:.5} over {} attempts ({:+.2} sigma)", stats.trials, (frac - q) / sigma));
    ok
}

fn criterion_7(log: &mut Log) -> bool {
    let spec = PhaseSweepSpec::reference();
    let rows = segments::phase_sweep(&spec, Execution::Parallel);
    let curve = |eps: f64| -> Vec<(f64, Option<f64>, bool)> {
        rows.iter()
            .filter(|r| r.epsilon == eps)
            .map(|r| (r.rho, r.mean_time, matches!(r.status, PointStatus::Error(_))))
            .collect()
    };
    let zero = curve(0.0);
    let one = curve(1.0);
    let diverged = |t: Option<f64>| t.map_or(true, |t| t > 1e6);
    let errors = rows.iter().filter(|r| matches!(r.status, PointStatus::Error(_))).count();
    // rho grid is increasing, so the diverged region is a prefix
    let prefix = zero.iter().take_while(|(_, t, err)| !err && diverged(*t)).count();
    let tail_finite = zero[prefix..].iter().all(|(_, t, _)| !diverged(*t));
    let eps0 = prefix > 0 && prefix < zero.len() && tail_finite;
    match prefix {
        0 => log.push(format!("eps=0: E[T] at rho={} is {:?}, not diverged", zero[0].0, zero[0].1)),
        _ => log.push(format!(
            "eps=0: E[T] > 1e6 or infinite for rho <= {:.4} ({prefix} grid points); at rho={:.4} it is {:.1}",
            zero[prefix - 1].0,
            zero[0].0,
            zero[0].1.unwrap_or(f64::INFINITY)
        )),
    }
    let all_finite = one.iter().all(|(_, t, _)| t.is_some_and(f64::is_finite));
    let small: Vec<f64> = one.iter().filter(|(rho, _, _)| *rho <= 1.0).filter_map(|(_, t, _)| *t).collect();
    let monotone = small.windows(2).all(|w| w[0] <= w[1]);
    log.push(format!(
        "eps=1: finite on all {} points: {all_finite}; from rho=1 down to {:.2}, E[T] goes {:.2} -> {:.2}, non-increasing: {monotone}",
        one.len(),
        one[0].0,
        small.last().copied().unwrap_or(f64::NAN),
        small.first().copied().unwrap_or(f64::NAN)
    ));
    log.push(format!("solver errors on the sweep: {errors}"));
    errors == 0 && eps0 && all_finite && monotone
}

fn criterion_8(log: &mut Log) -> bool {
    let rate = FIG3.rate();
    let p = FIG3.at(rate);
    let config = SimConfig::default().with_replications(2_000_000);
    let reports: Vec<RaceReport> = [2, 4, 8].iter().map(|&n| sim::simulate_race(&p, &RaceSpec::first_of(n).unwrap(), &config).unwrap()).collect();
    for (n, r) in [2, 4, 8].iter().zip(&reports) {
        log.push(format!(
            "r={rate:.6} N={n}: J- {:.2} ± {:.2}, J+ {:.2} ± {:.2}",
            r.j_minus.mean, r.j_minus.ci_half_width, r.j_plus.mean, r.j_plus.ci_half_width
        ));
    }
    let mut ok = reports.iter().all(|r| r.valid);
    for w in reports.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let plus = b.j_plus.mean - a.j_plus.mean;
        let minus = a.j_minus.mean - b.j_minus.mean;
        let plus_ok = plus > a.j_plus.ci_half_width + b.j_plus.ci_half_width;
        let minus_ok = minus > a.j_minus.ci_half_width + b.j_minus.ci_half_width;
        ok &= plus_ok && minus_ok;
        log.push(format!(
            "N={} -> {}: J+ rises {plus:.2} (needs {:.2}), J- falls {minus:.2} (needs {:.2})",
            a.race.n_searchers,
            b.race.n_searchers,
            a.j_plus.ci_half_width + b.j_plus.ci_half_width,
            a.j_minus.ci_half_width + b.j_minus.ci_half_width
        ));
    }
    ok
}

fn criterion_9(log: &mut Log) -> bool {
    let p = FIG4.params();
    let rows = optimize::min_curves_vs_n(&p, 3, &[4, 8, 16], &RateBracket::default(), &OptimizeOptions::default()).unwrap();
    for r in &rows {
        log.push(format!(
            "N={:2}: min J- {:.2} at 1/r={:.1}, min J+ {:.2} at 1/r={:.1}",
            r.n, r.energy_minus.value, r.energy_minus.timeout_mean, r.energy_plus.value, r.energy_plus.timeout_mean
        ));
    }
    let minus: Vec<f64> = rows.iter().map(|r| r.energy_minus.value).collect();
    let (lo, hi) = minus.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let spread = (hi - lo) / lo;
    let rising = rows.windows(2).all(|w| w[1].energy_plus.value > w[0].energy_plus.value);
    log.push(format!("min J- spread {:.2}%, min J+ increasing: {rising}", 100.0 * spread));
    spread < 0.15 && rising
}

/// CLI binary built alongside this test.
fn cli_binary() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let dir = exe.parent()?.parent()?;
    let bin = dir.join(format!("diffsearch{}", std::env::consts::EXE_SUFFIX));
    bin.is_file().then_some(bin)
}

/// Runs the CLI with `threads` workers into a fresh directory and reads `file`.
fn cli_outputs(bin: &Path, threads: &str, args: &[&str], file: &str) -> Option<Vec<u8>> {
    let dir = tempfile::tempdir().ok()?;
    let output = Command::new(bin).env("RAYON_NUM_THREADS", threads).arg("--out").arg(dir.path()).args(args).output().ok()?;
    if !output.status.success() {
        return None;
    }
    std::fs::read(dir.path().join(file)).ok()
}

fn criterion_10(log: &mut Log) -> bool {
    let p = FIG4.params();
    let race = RaceSpec::new(8, 3, Stopping::StopAll).unwrap();
    let mut ok = true;
    for (name, config) in [
        ("exact", SimConfig::default().with_replications(4000)),
        ("stepped", SimConfig::default().stepped(1e-2).with_replications(200)),
    ] {
        let sequential = sim::simulate_race(&p, &race, &SimConfig { execution: Execution::Sequential, ..config }).unwrap().samples;
        let same = [1, 4].iter().all(|&threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| sim::simulate_race(&p, &race, &config).unwrap().samples) == sequential
        });
        ok &= same;
        log.push(format!("library {name} engine: sequential, 1 and 4 worker threads identical: {same}"));
    }
    let Some(bin) = cli_binary() else {
        log.push("command-line binary not built next to this test".into());
        return false;
    };
    let simulate = [
        "simulate", "--replications", "3000", "--override", "b=0", "--override", "c=1", "--override", "lambda=0.0025", "--override", "r=0.0128",
        "--override", "mu=0.1", "--override", "D=10", "--override", "N=8", "--override", "k=3",
    ];
    let figure = ["figure", "fig3", "--replications", "400"];
    for (args, file) in [(&simulate[..], "samples.csv"), (&figure[..], "fig3.csv")] {
        let name = if args[0] == "figure" { "figure fig3" } else { "simulate" };
        let one = cli_outputs(&bin, "1", args, file);
        let four = cli_outputs(&bin, "4", args, file);
        let mut seq_args = args.to_vec();
        seq_args.push("--sequential");
        let seq = cli_outputs(&bin, "4", &seq_args, file);
        let same = one.is_some() && one == four && one == seq;
        ok &= same;
        log.push(format!("`diffsearch {name}`: {file} identical for 1 and 4 threads and --sequential: {same}"));
    }
    ok
}

fn criterion_11(log: &mut Log) -> bool {
    let p = FIG5.params();
    let report = sim::simulate_race(&p, &RaceSpec::new(50, 15, Stopping::StopAll).unwrap(), &SimConfig::default().with_replications(10_000)).unwrap();
    let (mean, var) = fpt::quantile_clt(&p, 0.3, 50, &InversionOptions::default()).unwrap();
    let err_mean = rel(report.t_k.mean, mean);
    let err_var = rel(report.t_k.variance, var);
    log.push(format!(
        "T_15,50 over {} races: mean {:.3} vs {mean:.3} ({:.2}%), variance {:.2} vs {var:.2} ({:.2}%)",
        report.t_k.samples,
        report.t_k.mean,
        100.0 * err_mean,
        report.t_k.variance,
        100.0 * err_var
    ));
    report.valid && err_mean <= 0.05 && err_var <= 0.15
}

fn main() {
    let started = Instant::now();
    let mut outcomes: Vec<(usize, bool)> = Vec::new();
    let mut check = |id: usize, title: &str, f: &mut dyn FnMut(&mut Log) -> bool| {
        let t = Instant::now();
        let mut log = Log::new();
        let pass = f(&mut log);
        println!("{} criterion {id:2}: {title} ({:.1} s)", if pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
        for line in log {
            println!("        {line}");
        }
        outcomes.push((id, pass));
    };
    let mut runs = Vec::new();
    check(1, "closed-form mean time agrees with simulation", &mut |log| {
        runs = caption_runs();
        criterion_1(&runs, log)
    });
    check(2, "closed-form energy agrees with simulation", &mut |log| criterion_2(&runs, log));
    check(3, "inverted CDF matches the empirical CDF", &mut criterion_3);
    check(4, "asymptotic searcher count tracks the exact count", &mut criterion_4);
    check(5, "finiteness cases and deterministic limit", &mut criterion_5);
    check(6, "segment solver reductions", &mut criterion_6);
    check(7, "phase transition in the segmented medium", &mut criterion_7);
    check(8, "energy with and without stopping versus N", &mut criterion_8);
    check(9, "minimum energy is flat in N", &mut criterion_9);
    check(10, "bit-identical reruns across worker counts", &mut criterion_10);
    check(11, "order-statistic normal approximation", &mut criterion_11);
    let failed: Vec<usize> = outcomes.iter().filter(|(_, p)| !p).map(|(id, _)| *id).collect();
    println!("{} of {} criteria passed in {:.1} s; failed: {:?}", outcomes.len() - failed.len(), outcomes.len(), started.elapsed().as_secs_f64(), failed);
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
