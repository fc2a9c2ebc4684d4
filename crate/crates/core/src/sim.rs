//! Fixed-step closed-loop simulation, run logs and post-run analysis.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::controllers::{Controller, GainVerdict};
use crate::error::{Error, Result};
use crate::ode::rk4_step;
use crate::plants::{manip_rhs, DisturbanceModel, EulerLagrange, ReferenceTrajectory};
use crate::surfaces::{ptsm_lyapunov, SurfaceFlow};
use crate::vecops::{norm2, norm_inf, SgnMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub sgn: SgnMode,
    /// Record every k-th step.
    pub log_decimation: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            horizon: 15.0,
            seed: 0,
            sgn: SgnMode::default(),
            log_decimation: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > self.dt && self.horizon.is_finite()) {
            return Err(Error::invalid(format!(
                "horizon must exceed dt, got {} <= {}",
                self.horizon, self.dt
            )));
        }
        if self.log_decimation == 0 {
            return Err(Error::invalid("log_decimation must be >= 1"));
        }
        if let SgnMode::BoundaryLayer { width } = self.sgn {
            if !(width > 0.0 && width.is_finite()) {
                return Err(Error::invalid(format!("layer width must be positive, got {width}")));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }
}

/// Anything that maps `(q, q̇, τ, d)` to `q̈`.
pub trait Plant: Send + Sync {
    fn dof(&self) -> usize;

    fn acceleration(&self, q: &[f64], qdot: &[f64], tau: &[f64], d: &[f64]) -> Result<Vec<f64>>;
}

/// `q̈ = τ + d`: the second-order chain with `ξ = q`, `η = q̇`.
#[derive(Debug, Clone, Copy)]
pub struct DoubleIntegrator {
    pub dim: usize,
}

impl Plant for DoubleIntegrator {
    fn dof(&self) -> usize {
        self.dim
    }

    fn acceleration(&self, _q: &[f64], _qdot: &[f64], tau: &[f64], d: &[f64]) -> Result<Vec<f64>> {
        if tau.len() != self.dim || d.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: tau.len().min(d.len()),
            });
        }
        Ok(tau.iter().zip(d).map(|(a, b)| a + b).collect())
    }
}

/// Euler-Lagrange model simulated with its own (true) parameters.
#[derive(Debug, Clone)]
pub struct ManipulatorPlant<E>(pub E);

impl<E: EulerLagrange> Plant for ManipulatorPlant<E> {
    fn dof(&self) -> usize {
        self.0.dof()
    }

    fn acceleration(&self, q: &[f64], qdot: &[f64], tau: &[f64], d: &[f64]) -> Result<Vec<f64>> {
        manip_rhs(&self.0, q, qdot, tau, d)
    }
}

/// One logged sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub e: Vec<f64>,
    pub ed: Vec<f64>,
    pub s: Vec<f64>,
    pub tau: Vec<f64>,
    pub d: Vec<f64>,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub config: Option<SimConfig>,
    pub verdict: Option<GainVerdict>,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub dof: usize,
    pub records: Vec<Record>,
    pub meta: RunMeta,
}

impl SimLog {
    /// Wrap a reduced surface flow so the analysis functions apply to it:
    /// `q = e = x`, `q̇ = ė = 0`, `s = 0`.
    pub fn from_surface_flow(flow: &SurfaceFlow) -> Self {
        let dof = flow.x.first().map_or(0, Vec::len);
        let records = flow
            .t
            .iter()
            .zip(&flow.x)
            .map(|(&t, x)| Record {
                t,
                q: x.clone(),
                qd: vec![0.0; dof],
                e: x.clone(),
                ed: vec![0.0; dof],
                s: vec![0.0; dof],
                tau: vec![0.0; dof],
                d: vec![0.0; dof],
                v: 0.0,
            })
            .collect();
        Self {
            dof,
            records,
            meta: RunMeta {
                config: None,
                verdict: None,
                wall_clock_s: 0.0,
            },
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    /// Last record with `t ≤ at`.
    pub fn at(&self, at: f64) -> Option<&Record> {
        self.records.iter().take_while(|r| r.t <= at + 1e-12).last()
    }
}

/// Closed-loop integration from `(q0, q̇0)` over `[0, cfg.horizon]`.
///
/// Controller output and disturbance are held constant over each step of
/// length `dt`; the plant is advanced with classical RK4.
#[allow(clippy::too_many_arguments)]
pub fn integrate<P, C, R>(
    plant: &P,
    controller: &C,
    reference: &R,
    disturbance: &DisturbanceModel,
    cfg: &SimConfig,
    q0: &[f64],
    qd0: &[f64],
    verdict: Option<GainVerdict>,
) -> Result<SimLog>
where
    P: Plant + ?Sized,
    C: Controller + ?Sized,
    R: ReferenceTrajectory + ?Sized,
{
    cfg.validate()?;
    let n = plant.dof();
    for got in [controller.dof(), reference.dim(), disturbance.dim, q0.len(), qd0.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    let started = Instant::now();
    let steps = cfg.steps();
    let mut y: Vec<f64> = q0.iter().chain(qd0).copied().collect();
    let mut records = Vec::with_capacity((steps / cfg.log_decimation as u64 + 1) as usize);
    let failure: RefCell<Option<Error>> = RefCell::new(None);

    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { t });
        }
        let r = reference.eval(t);
        let c = controller.control(t, &y[..n], &y[n..], &r)?;
        if c.tau.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { t });
        }
        let d = disturbance.sample_step(k);
        if k % cfg.log_decimation as u64 == 0 {
            records.push(Record {
                t,
                q: y[..n].to_vec(),
                qd: y[n..].to_vec(),
                e: c.e,
                ed: c.edot,
                s: c.s,
                tau: c.tau.clone(),
                d: d.clone(),
                v: c.v,
            });
        }
        if k == steps {
            break;
        }
        let rhs = |_t: f64, y: &[f64]| -> Vec<f64> {
            match plant.acceleration(&y[..n], &y[n..], &c.tau, &d) {
                Ok(a) => y[n..].iter().copied().chain(a).collect(),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    vec![f64::NAN; 2 * n]
                }
            }
        };
        y = rk4_step(rhs, t, &y, cfg.dt);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
    }

    Ok(SimLog {
        dof: n,
        records,
        meta: RunMeta {
            config: Some(*cfg),
            verdict,
            wall_clock_s: started.elapsed().as_secs_f64(),
        },
    })
}

// ---------------------------------------------------------------------------
// Analysis

/// Which logged series a settling time refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// `q` and `q̇` together
    State,
    /// tracking error `e`
    Error,
    Surface,
}

fn measure_norm(r: &Record, which: Measure) -> f64 {
    match which {
        Measure::State => norm_inf(&r.q).max(norm_inf(&r.qd)),
        Measure::Error => norm_inf(&r.e),
        Measure::Surface => norm_inf(&r.s),
    }
}

/// Earliest logged `t*` after which the chosen series stays below `tol`
/// (∞-norm) until the end of the log.
pub fn settling_time(log: &SimLog, tol: f64, which: Measure) -> Result<Option<f64>> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tol must be positive, got {tol}")));
    }
    let last_bad = log
        .records
        .iter()
        .rposition(|r| !(measure_norm(r, which) < tol));
    Ok(match last_bad {
        None => log.records.first().map(|r| r.t),
        Some(i) => log.records.get(i + 1).map(|r| r.t),
    })
}

/// Largest ∞-norm of the chosen series over logged `t ≥ from`.
pub fn max_after(log: &SimLog, from: f64, which: Measure) -> f64 {
    log.records
        .iter()
        .filter(|r| r.t >= from - 1e-12)
        .map(|r| measure_norm(r, which))
        .fold(0.0, f64::max)
}

/// `∫₀^{t_end} ‖τ(t)‖₂ dt`, trapezoidal over the log with a linearly
/// interpolated last panel.
pub fn energy(log: &SimLog, t_end: f64) -> Result<f64> {
    let last = log.records.last().map_or(0.0, |r| r.t);
    if t_end > last + 1e-9 || t_end < 0.0 {
        return Err(Error::invalid(format!(
            "t_end = {t_end} outside logged range [0, {last}]"
        )));
    }
    let mut total = 0.0;
    for w in log.records.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.t >= t_end {
            break;
        }
        let (fa, fb) = (norm2(&a.tau), norm2(&b.tau));
        if b.t <= t_end {
            total += 0.5 * (b.t - a.t) * (fa + fb);
        } else {
            let frac = (t_end - a.t) / (b.t - a.t);
            let f_end = fa + frac * (fb - fa);
            total += 0.5 * (t_end - a.t) * (fa + f_end);
        }
    }
    Ok(total)
}

/// Lyapunov candidate reconstructed from the log.
#[derive(Clone, Copy)]
pub enum LyapunovKind<'a> {
    /// `½sᵀs`
    HalfSTs,
    /// `½sᵀM0(q)s` with the given nominal model
    HalfSTM0s(&'a dyn EulerLagrange),
    /// `Σ (|e_i|/√(1+e_i²))^{1−γ}` of the reduced surface flow
    PtsmScalar { gamma: f64 },
}

/// Reference decrement the finite-difference `V̇` is compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecrementLaw {
    /// `V̇ ≤ −(π/(ρT_c))(V^{1−ρ/2} + V^{1+ρ/2})`
    PredefinedTime { rho: f64, t_c: f64 },
    /// `V̇ = −rate`
    Constant { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub vdot: Vec<f64>,
    pub rhs: Vec<f64>,
    pub checked: Vec<bool>,
    pub n_checked: usize,
    pub n_violations: usize,
    pub violation_fraction: f64,
    /// largest `|V̇ − rhs| / |rhs|` among checked points
    pub max_rel_error: f64,
}

/// `V` series, its central-difference derivative (one-sided at the ends)
/// and the decrement check over the pre-reaching phase: every point before
/// the primary signal first drops below `reach_threshold`. The primary
/// signal is `min_i |s_i|` for the surface-based kinds and `‖e‖∞` for the
/// scalar flow. `rel_tol` is relative to the right-hand side.
pub fn lyapunov_trace(
    log: &SimLog,
    kind: LyapunovKind<'_>,
    law: DecrementLaw,
    reach_threshold: f64,
    rel_tol: f64,
) -> Result<LyapunovReport> {
    let v: Vec<f64> = log
        .records
        .iter()
        .map(|r| -> Result<f64> {
            Ok(match kind {
                LyapunovKind::HalfSTs => 0.5 * r.s.iter().map(|x| x * x).sum::<f64>(),
                LyapunovKind::HalfSTM0s(m) => {
                    let mass = m.dynamics(&r.q, &r.qd)?.mass;
                    let s = DVector::from_column_slice(&r.s);
                    0.5 * s.dot(&(mass * &s))
                }
                LyapunovKind::PtsmScalar { gamma } => r.e.iter().map(|&x| ptsm_lyapunov(x, gamma)).sum(),
            })
        })
        .collect::<Result<_>>()?;
    let t = log.times();
    let n = v.len();
    let mut vdot = vec![0.0; n];
    if n >= 2 {
        vdot[0] = (v[1] - v[0]) / (t[1] - t[0]);
        vdot[n - 1] = (v[n - 1] - v[n - 2]) / (t[n - 1] - t[n - 2]);
        for i in 1..n - 1 {
            vdot[i] = (v[i + 1] - v[i - 1]) / (t[i + 1] - t[i - 1]);
        }
    }
    let rhs: Vec<f64> = v
        .iter()
        .map(|&vi| match law {
            DecrementLaw::PredefinedTime { rho, t_c } => {
                -(PI / (rho * t_c)) * (vi.powf(1.0 - rho / 2.0) + vi.powf(1.0 + rho / 2.0))
            }
            DecrementLaw::Constant { rate } => -rate,
        })
        .collect();
    let reached = log
        .records
        .iter()
        .position(|r| {
            let signal = match kind {
                LyapunovKind::PtsmScalar { .. } => norm_inf(&r.e),
                _ => r.s.iter().fold(f64::INFINITY, |m, x| m.min(x.abs())),
            };
            signal < reach_threshold
        })
        .unwrap_or(n);
    let checked: Vec<bool> = (0..n).map(|i| n >= 2 && i < reached).collect();
    let mut n_checked = 0;
    let mut n_violations = 0;
    let mut max_rel_error: f64 = 0.0;
    for i in 0..n {
        if !checked[i] {
            continue;
        }
        n_checked += 1;
        let scale = rhs[i].abs().max(f64::MIN_POSITIVE);
        let rel = (vdot[i] - rhs[i]) / scale;
        max_rel_error = max_rel_error.max(rel.abs());
        let violated = match law {
            DecrementLaw::PredefinedTime { .. } => rel > rel_tol,
            DecrementLaw::Constant { .. } => rel.abs() > rel_tol,
        };
        if violated {
            n_violations += 1;
        }
    }
    Ok(LyapunovReport {
        t,
        v,
        vdot,
        rhs,
        checked,
        n_checked,
        n_violations,
        violation_fraction: if n_checked == 0 {
            0.0
        } else {
            n_violations as f64 / n_checked as f64
        },
        max_rel_error,
    })
}

// ---------------------------------------------------------------------------
// CSV

/// Column names `t, q1..qn, qd1..qdn, e1..en, ed1..edn, s1..sn, tau1..taun, d1..dn, V`.
pub fn csv_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for prefix in ["q", "qd", "e", "ed", "s", "tau", "d"] {
        h.extend((1..=n).map(|i| format!("{prefix}{i}")));
    }
    h.push("V".into());
    h
}

pub fn write_csv<W: std::io::Write>(log: &SimLog, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(log.dof))?;
    let mut row: Vec<String> = Vec::with_capacity(2 + 7 * log.dof);
    for r in &log.records {
        row.clear();
        row.push(r.t.to_string());
        for series in [&r.q, &r.qd, &r.e, &r.ed, &r.s, &r.tau, &r.d] {
            row.extend(series.iter().map(f64::to_string));
        }
        row.push(r.v.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(log: &SimLog, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_csv(log, std::io::BufWriter::new(f))
}

/// Read a log written by [`write_csv`]; metadata is not part of the CSV.
pub fn read_csv<R: std::io::Read>(input: R) -> Result<SimLog> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 || !(header.len() - 2).is_multiple_of(7) {
        return Err(Error::Config(format!("unexpected column count {}", header.len())));
    }
    let n = (header.len() - 2) / 7;
    if header != csv_header(n) {
        return Err(Error::Config("CSV header does not match the log column layout".into()));
    }
    let mut records = Vec::new();
    for row in rd.records() {
        let row = row?;
        let vals: Vec<f64> = row
            .iter()
            .map(|c| c.parse::<f64>().map_err(|e| Error::Config(format!("bad number `{c}`: {e}"))))
            .collect::<Result<_>>()?;
        let block = |k: usize| vals[1 + k * n..1 + (k + 1) * n].to_vec();
        records.push(Record {
            t: vals[0],
            q: block(0),
            qd: block(1),
            e: block(2),
            ed: block(3),
            s: block(4),
            tau: block(5),
            d: block(6),
            v: vals[1 + 7 * n],
        });
    }
    Ok(SimLog {
        dof: n,
        records,
        meta: RunMeta {
            config: None,
            verdict: None,
            wall_clock_s: 0.0,
        },
    })
}

pub fn read_csv_file(path: &Path) -> Result<SimLog> {
    read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::{Guards, SecondOrderController, SecondOrderGains, ZeroController};
    use crate::plants::{DisturbanceKind, ZeroReference};
    use crate::surfaces::{integrate_on_surface, SurfaceConfig};

    fn record(t: f64, e: f64) -> Record {
        Record {
            t,
            q: vec![e],
            qd: vec![0.0],
            e: vec![e],
            ed: vec![0.0],
            s: vec![e],
            tau: vec![0.0],
            d: vec![0.0],
            v: 0.0,
        }
    }

    fn log_of(rs: Vec<Record>) -> SimLog {
        SimLog {
            dof: 1,
            records: rs,
            meta: RunMeta {
                config: None,
                verdict: None,
                wall_clock_s: 0.0,
            },
        }
    }

    fn short_cfg(seed: u64) -> SimConfig {
        SimConfig {
            dt: 1e-3,
            horizon: 2.0,
            seed,
            ..SimConfig::default()
        }
    }

    fn example1_run(cfg: &SimConfig, x0: [f64; 2], v0: [f64; 2]) -> SimLog {
        let ctl = SecondOrderController::new(SecondOrderGains::example1(), cfg.sgn, Guards::default()).unwrap();
        let dm = DisturbanceModel::new(DisturbanceKind::PiecewiseConstantUniform, 5.0, cfg.seed, 2).unwrap();
        integrate(&DoubleIntegrator { dim: 2 }, &ctl, &ZeroReference { dim: 2 }, &dm, cfg, &x0, &v0, None).unwrap()
    }

    #[test]
    fn rest_stays_at_rest() {
        let cfg = short_cfg(0);
        let log = integrate(
            &DoubleIntegrator { dim: 2 },
            &ZeroController { dim: 2 },
            &ZeroReference { dim: 2 },
            &DisturbanceModel::zero(2),
            &cfg,
            &[0.0, 0.0],
            &[0.0, 0.0],
            None,
        )
        .unwrap();
        assert_eq!(log.records.len(), 2001);
        assert!(log.records.iter().all(|r| r.q == vec![0.0, 0.0] && r.qd == vec![0.0, 0.0]));
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig { dt: 0.0, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { horizon: 1e-5, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { log_decimation: 0, ..SimConfig::default() }.validate().is_err());
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let r = integrate(
            &DoubleIntegrator { dim: 2 },
            &ZeroController { dim: 3 },
            &ZeroReference { dim: 2 },
            &DisturbanceModel::zero(2),
            &short_cfg(0),
            &[0.0, 0.0],
            &[0.0, 0.0],
            None,
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn settling_examples() {
        let zero = log_of((0..10).map(|k| record(k as f64, 0.0)).collect());
        assert_eq!(settling_time(&zero, 1e-2, Measure::Error).unwrap(), Some(0.0));
        let dip = [1.0, 0.0, 0.5, 0.0, 0.0];
        let log = log_of(dip.iter().enumerate().map(|(k, &e)| record(k as f64, e)).collect());
        assert_eq!(settling_time(&log, 1e-2, Measure::Error).unwrap(), Some(3.0));
        let never = log_of(vec![record(0.0, 0.0), record(1.0, 1.0)]);
        assert_eq!(settling_time(&never, 1e-2, Measure::Error).unwrap(), None);
        assert!(settling_time(&never, 0.0, Measure::Error).is_err());
    }

    #[test]
    fn energy_examples() {
        let zero = log_of((0..=10).map(|k| record(k as f64, 0.0)).collect());
        assert_eq!(energy(&zero, 10.0).unwrap(), 0.0);
        let mut rs: Vec<Record> = (0..=100).map(|k| record(k as f64 * 0.1, 0.0)).collect();
        for r in &mut rs {
            r.tau = vec![3.0];
        }
        let log = log_of(rs);
        assert!((energy(&log, 10.0).unwrap() - 30.0).abs() < 1e-9);
        assert!((energy(&log, 2.55).unwrap() - 7.65).abs() < 1e-9);
        assert!(energy(&log, 11.0).is_err());
        let mut prev = 0.0;
        for k in 0..=40 {
            let e = energy(&log, 0.25 * k as f64).unwrap();
            assert!(e >= prev);
            prev = e;
        }
    }

    #[test]
    fn deterministic_and_decimation_neutral() {
        let cfg = short_cfg(11);
        let a = example1_run(&cfg, [3.0, -2.0], [1.0, 0.5]);
        let b = example1_run(&cfg, [3.0, -2.0], [1.0, 0.5]);
        assert_eq!(a.records, b.records);
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        write_csv(&a, &mut ca).unwrap();
        write_csv(&b, &mut cb).unwrap();
        assert_eq!(ca, cb);

        let dec = example1_run(&SimConfig { log_decimation: 7, ..cfg }, [3.0, -2.0], [1.0, 0.5]);
        for r in &dec.records {
            let k = (r.t / cfg.dt).round() as usize;
            assert_eq!(r, &a.records[k]);
        }
        let spacing: Vec<f64> = dec.records.windows(2).map(|w| w[1].t - w[0].t).collect();
        assert!(spacing.iter().all(|s| (s - 7e-3).abs() < 1e-12));
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let log = example1_run(&SimConfig { log_decimation: 50, ..short_cfg(4) }, [1.5, -7.25], [0.1, 2.0]);
        let mut buf = Vec::new();
        write_csv(&log, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,q1,q2,qd1,qd2,e1,e2,ed1,ed2,s1,s2,tau1,tau2,d1,d2,V\n"));
        let back = read_csv(&buf[..]).unwrap();
        assert_eq!(back.records, log.records);
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn lyapunov_zero_surface_gives_zero() {
        let log = log_of((0..10).map(|k| record(k as f64, 0.0)).collect());
        let rep = lyapunov_trace(&log, LyapunovKind::HalfSTs, DecrementLaw::PredefinedTime { rho: 0.4, t_c: 6.0 }, 1e-3, 0.02).unwrap();
        assert!(rep.v.iter().all(|&v| v == 0.0));
        assert_eq!(rep.n_checked, 0);
    }

    #[test]
    fn lyapunov_on_surface_flow_has_constant_rate() {
        let cfg = SurfaceConfig::ptsm(4.0, 0.5).unwrap();
        let flow = integrate_on_surface(&cfg, &[250.0], 4.5, 1e-3).unwrap();
        let log = SimLog::from_surface_flow(&flow);
        let rep = lyapunov_trace(&log, LyapunovKind::PtsmScalar { gamma: 0.5 }, DecrementLaw::Constant { rate: 0.25 }, 1e-3, 0.01)
            .unwrap();
        assert!(rep.n_checked > 1000);
        assert_eq!(rep.n_violations, 0, "max rel error {}", rep.max_rel_error);
    }
}
