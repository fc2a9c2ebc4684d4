//! Reproduction criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use ptsm::experiments::*;
use ptsm::sim::{max_after, Measure};
use ptsm::validate;

struct Outcome {
    pass: bool,
    detail: String,
    info: Vec<String>,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome {
        pass,
        detail,
        info: Vec::new(),
    }
}

fn run_all(cfg: &ExperimentConfig) -> Vec<RunResult> {
    cfg.seeds.iter().map(|&s| run_seed(cfg, s).expect("run")).collect()
}

fn c1_example1() -> Outcome {
    let started = Instant::now();
    let cfg = experiment_preset("example1").unwrap();
    let runs = run_all(&cfg);
    let elapsed = started.elapsed().as_secs_f64();
    let worst = runs
        .iter()
        .map(|r| r.log.as_ref().map_or(f64::INFINITY, |l| max_after(l, 10.0, Measure::State)))
        .fold(0.0, f64::max);
    outcome(
        runs.len() == 10 && worst < 1e-2 && elapsed < 30.0,
        format!("10 runs, max |state| on [10, 15] = {worst:.3e} (< 1e-2), {elapsed:.1} s"),
    )
}

fn c2_example2() -> Outcome {
    let started = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["example2a", "example2b"] {
        let cfg = experiment_preset(name).unwrap();
        let (t_s, t_c) = cfg.times().unwrap();
        let runs = run_all(&cfg);
        let worst = runs
            .iter()
            .map(|r| r.log.as_ref().map_or(f64::INFINITY, |l| max_after(l, t_s + t_c, Measure::Error)))
            .fold(0.0, f64::max);
        pass &= runs.len() == 5 && worst < 1e-2;
        parts.push(format!("{name}: max |e| after {} s = {worst:.3e}", t_s + t_c));
    }
    let elapsed = started.elapsed().as_secs_f64();
    pass &= elapsed < 60.0;
    outcome(pass, format!("{}, {elapsed:.1} s", parts.join("; ")))
}

fn surface_bound_summary(cfg: &ExperimentConfig) -> (usize, usize, f64) {
    let runs = run_all(cfg);
    let passed = runs.iter().filter(|r| r.summary.checks.iter().all(|c| c.pass)).count();
    let residual = runs
        .iter()
        .map(|r| r.log.as_ref().map_or(f64::INFINITY, |l| max_after(l, 10.0, Measure::Error)))
        .fold(0.0, f64::max);
    (passed, runs.len(), residual)
}

fn c3_surface_bound() -> Outcome {
    let mut cfg = experiment_preset("example3").unwrap();
    cfg.use_premise_gains().unwrap();
    let (passed, n, residual) = surface_bound_summary(&cfg);
    let example_gains = experiment_preset("example3").unwrap();
    let (p_passed, p_n, p_residual) = surface_bound_summary(&example_gains);
    let mut o = outcome(
        passed == n && residual.is_finite(),
        format!(
            "gains meeting the condition: |s(T_c)| within bound + 5% on {passed}/{n} runs, max |e| after 10 s = {residual:.3e}"
        ),
    );
    o.info.push(format!(
        "example gains (sigma_hat_m0 = 2.5, K_d = 25): bound held on {p_passed}/{p_n} runs, max |e| after 10 s = {p_residual:.3e}"
    ));
    o
}

fn c4_energy() -> Outcome {
    let seeds: Vec<u64> = (0..5).collect();
    let report = run_compare(&seeds, None, true, None, 1).unwrap();
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("seed {}: ptsm {:.0} tbg {:.0} fixed {:.0}", r.seed, r.ptsm, r.tbg, r.fixed))
        .collect();
    let mut o = outcome(
        report.pass,
        format!(
            "gains meeting the condition: E_tbg < E_ptsm on {}/{} seeds",
            report.rows.iter().filter(|r| r.tbg_below_ptsm).count(),
            report.rows.len()
        ),
    );
    o.info.extend(rows);
    let example_run = run_compare(&seeds, None, false, None, 1).unwrap();
    let total = |f: fn(&EnergyRow) -> f64| example_run.rows.iter().map(f).sum::<f64>();
    o.info.push(format!(
        "example gains: E_tbg < E_ptsm on {}/{} seeds, totals ptsm {:.0} tbg {:.0} fixed {:.0}",
        example_run.rows.iter().filter(|r| r.tbg_below_ptsm).count(),
        example_run.rows.len(),
        total(|r| r.ptsm),
        total(|r| r.tbg),
        total(|r| r.fixed),
    ));
    o
}

fn c5_ptsm_flow() -> Outcome {
    let started = Instant::now();
    let (settle, rate) = validate::ptsm_flow_suite(20, 5).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    outcome(
        settle.pass && rate.pass && elapsed < 10.0,
        format!("{}; {}; {elapsed:.1} s", settle.detail, rate.detail),
    )
}

fn c6_fixed_time() -> Outcome {
    let cfg = experiment_preset("fixed_time").unwrap();
    let verdict = cfg.gain_verdict().unwrap();
    let bound = cfg.controller.manip.as_ref().unwrap().fixed_time_settling_bound();
    let runs = run_all(&cfg);
    let worst = runs
        .iter()
        .map(|r| {
            r.summary
                .settling
                .as_ref()
                .and_then(|s| s.error)
                .unwrap_or(f64::INFINITY)
        })
        .fold(0.0, f64::max);
    outcome(
        verdict.pass && bound == 11.0 && runs.len() == 5 && worst <= bound,
        format!(
            "gain check margin {}, worst settling(error, 1e-2) = {worst:.3} s <= {bound} s over {} seeds",
            verdict.margin,
            runs.len()
        ),
    )
}

fn c7_mechanics() -> Outcome {
    let props = [
        validate::skew_symmetry(1000, 11).unwrap(),
        validate::mass_positive_definite(50).unwrap(),
        validate::tbg_properties(6.0).unwrap(),
        validate::tbg_gain_flow(6.0).unwrap(),
    ];
    outcome(
        props.iter().all(|p| p.pass),
        props
            .iter()
            .map(|p| format!("{} {}", p.name, if p.pass { "ok" } else { "failed" }))
            .collect::<Vec<_>>()
            .join(", "),
    )
}

fn c8_determinism() -> Outcome {
    let mut identical = true;
    let mut compared = 0;
    for (name, seed) in [("example1", 4u64), ("example2b", 1), ("example3", 2)] {
        let mut cfg = experiment_preset(name).unwrap();
        cfg.seeds = vec![seed];
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for d in &dirs {
            run_experiment(&cfg, Some(d.path()), 1).unwrap();
        }
        let csv = |d: &tempfile::TempDir| {
            std::fs::read(d.path().join(name).join(format!("run_{seed}")).join("trajectory.csv")).unwrap()
        };
        identical &= csv(&dirs[0]) == csv(&dirs[1]);
        compared += 1;
    }
    outcome(identical, format!("{compared} repeated runs, CSV bytes identical: {identical}"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("example 1 reproduction", c1_example1),
        ("example 2 reproduction", c2_example2),
        ("TBG surface bound", c3_surface_bound),
        ("energy ordering", c4_energy),
        ("on-surface PTSM flow", c5_ptsm_flow),
        ("fixed-time settling", c6_fixed_time),
        ("mechanics properties", c7_mechanics),
        ("determinism", c8_determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!(
            "criterion {} ({name}): {} {}",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        for line in o.info {
            println!("    info: {line}");
        }
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
