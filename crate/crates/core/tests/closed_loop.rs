use ptsm::controllers::{Guards, SecondOrderController, SecondOrderGains};
use ptsm::experiments::*;
use ptsm::plants::*;
use ptsm::sim::*;
use ptsm::surfaces::{integrate_on_surface, SurfaceConfig};
use ptsm::vecops::{norm_inf, SgnMode};

fn example1_log(q0: &[f64], qd0: &[f64], horizon: f64, dt: f64, disturbed: bool) -> SimLog {
    let ctrl = SecondOrderController::new(SecondOrderGains::example1(), SgnMode::default(), Guards::default()).unwrap();
    let dm = if disturbed {
        DisturbanceModel::new(DisturbanceKind::PiecewiseConstantUniform, 5.0, 0, 2).unwrap()
    } else {
        DisturbanceModel::zero(2)
    };
    let cfg = SimConfig {
        dt,
        horizon,
        log_decimation: 10,
        ..SimConfig::default()
    };
    integrate(&DoubleIntegrator { dim: 2 }, &ctrl, &ZeroReference { dim: 2 }, &dm, &cfg, q0, qd0, None).unwrap()
}

#[test]
fn second_order_from_ten_minus_ten_settles_by_ten_seconds() {
    let log = example1_log(&[10.0, -10.0], &[10.0, -10.0], 10.0, 1e-4, true);
    let last = log.records.last().unwrap();
    assert!((last.t - 10.0).abs() < 1e-9);
    assert!(norm_inf(&last.q) < 1e-2, "xi(10) = {:?}", last.q);
}

#[test]
fn manipulator_reaches_and_slides() {
    let width = 5e-3;
    let mut cfg = experiment_preset("example2a").unwrap();
    cfg.seeds = (0..10).collect();
    cfg.sim.layer_width = width;
    let (t_s, t_c) = cfg.times().unwrap();
    for &seed in &cfg.seeds {
        let log = run_seed(&cfg, seed).unwrap().log.expect("completed");
        let s_max = max_after(&log, t_c, Measure::Surface);
        let e_max = max_after(&log, t_s + t_c, Measure::Error);
        assert!(s_max < 10.0 * width, "seed {seed}: max |s| after T_c = {s_max}");
        assert!(e_max < 1e-2, "seed {seed}: max |e| after T_s + T_c = {e_max}");
    }
}

#[test]
fn tbg_surface_bound_holds_with_premise_gains() {
    let mut cfg = experiment_preset("example3").unwrap();
    let fit = cfg.use_premise_gains().unwrap();
    assert!(fit.sigma_m > 5.0);
    assert!(cfg.gain_verdict().unwrap().pass);
    cfg.seeds = (0..10).collect();
    for &seed in &cfg.seeds {
        let r = run_seed(&cfg, seed).unwrap();
        let check = &r.summary.checks[0];
        assert!(check.pass, "seed {seed}: |s(T_c)| = {} > {}", check.value, check.limit);
    }
}

#[test]
fn lyapunov_decrement_before_reaching() {
    let nominal = ManipulatorParams::nominal_preset();
    let mut cfg = experiment_preset("example2a").unwrap();
    cfg.use_premise_gains().unwrap();
    cfg.plant.preset = "manip2dof-nominal".into();
    cfg.disturbance = DisturbanceSection {
        kind: DisturbanceKind::Zero,
        bound: 0.0,
    };
    cfg.sim.dt = 1e-5;
    cfg.sim.horizon = 0.3;
    cfg.sim.log_decimation = 1;
    let g = cfg.controller.manip.clone().unwrap();
    for seed in 0..5 {
        let log = run_seed(&cfg, seed).unwrap().log.unwrap();
        let rep = lyapunov_trace(
            &log,
            LyapunovKind::HalfSTM0s(&nominal),
            DecrementLaw::PredefinedTime { rho: g.rho, t_c: g.t_c },
            0.5,
            0.02,
        )
        .unwrap();
        assert!(rep.n_checked > 10, "seed {seed}");
        assert!(rep.violation_fraction < 0.02, "seed {seed}: {}", rep.violation_fraction);
    }
}

#[test]
fn settling_is_scale_free_under_ptsm() {
    let settle = |a: f64| {
        let log = example1_log(&[a, -0.5 * a], &[-a, 0.25 * a], 8.0, 1e-4, false);
        settling_time(&log, 1e-2, Measure::State).unwrap().unwrap()
    };
    for a in [10.0, 20.0, 40.0] {
        let (t1, t2) = (settle(a), settle(2.0 * a));
        assert!(((t2 - t1) / t1).abs() < 0.05, "a={a}: {t1} vs {t2}");
    }

    // the finite-time surface without the predefined-time scaling slows down
    let fb = SurfaceConfig::finite_basic(1.0, 0.5).unwrap();
    let reach = |x0: f64| {
        let flow = integrate_on_surface(&fb, &[x0], 40.0, 1e-3).unwrap();
        let k = flow.x.iter().position(|x| x[0].abs() < 1e-2).unwrap();
        flow.t[k]
    };
    let (t1, t2) = (reach(20.0), reach(40.0));
    assert!(t2 > 1.3 * t1, "{t1} vs {t2}");
}

#[test]
fn undisturbed_runs_settle_no_later() {
    let mut cfg = experiment_preset("example1").unwrap();
    let mut quiet = cfg.clone();
    quiet.disturbance = DisturbanceSection {
        kind: DisturbanceKind::Zero,
        bound: 0.0,
    };
    cfg.sim.horizon = 12.0;
    quiet.sim.horizon = 12.0;
    for seed in 0..5 {
        let noisy = run_seed(&cfg, seed).unwrap().summary.settling.unwrap().state.unwrap();
        let calm = run_seed(&quiet, seed).unwrap().summary.settling.unwrap().state.unwrap();
        assert!(calm <= noisy, "seed {seed}: {calm} > {noisy}");
    }
}

#[test]
fn halving_dt_mid_transient() {
    for (q0, qd0) in [([10.0, -10.0], [10.0, -10.0]), ([-7.0, 3.0], [2.0, 12.0])] {
        let a = example1_log(&q0, &qd0, 3.0, 1e-4, false);
        let b = example1_log(&q0, &qd0, 3.0, 5e-5, false);
        let ea = norm_inf(&a.records.last().unwrap().e);
        let eb = norm_inf(&b.records.last().unwrap().e);
        assert!(((ea - eb) / ea).abs() < 0.1, "{ea} vs {eb}");
    }
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let mut cfg = experiment_preset("example3").unwrap();
    cfg.sim.horizon = 2.0;
    let csv = |cfg: &ExperimentConfig| {
        let log = run_seed(cfg, 3).unwrap().log.unwrap();
        let mut buf = Vec::new();
        write_csv(&log, &mut buf).unwrap();
        buf
    };
    assert_eq!(csv(&cfg), csv(&cfg));
}

#[test]
fn decimation_does_not_change_the_trajectory() {
    let mut cfg = experiment_preset("example2b").unwrap();
    cfg.sim.horizon = 1.0;
    cfg.sim.log_decimation = 1;
    let fine = run_seed(&cfg, 2).unwrap().log.unwrap();
    cfg.sim.log_decimation = 7;
    let coarse = run_seed(&cfg, 2).unwrap().log.unwrap();
    assert!(coarse.records.len() > 100);
    for (k, r) in coarse.records.iter().enumerate() {
        let f = &fine.records[7 * k];
        assert_eq!(f.t.to_bits(), r.t.to_bits());
        assert_eq!(f.q, r.q);
        assert_eq!(f.tau, r.tau);
    }
}

#[test]
fn energy_grows_with_the_window() {
    let cfg = experiment_preset("example2a").unwrap();
    let mut short = cfg.clone();
    short.sim.horizon = 3.0;
    let log = run_seed(&short, 0).unwrap().log.unwrap();
    let mut prev = 0.0;
    for k in 1..=30 {
        let e = energy(&log, 0.1 * k as f64).unwrap();
        assert!(e >= prev);
        prev = e;
    }
}

