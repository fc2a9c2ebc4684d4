//! Experiment configuration, the built-in experiment presets, and the batch
//! runner that writes per-run CSV logs, summaries and an aggregate report.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controllers::{
    check_gains, Bounds, Controller, GainCondition, GainSet, GainVerdict, Guards, ManipController, ManipGains,
    ManipLaw, SecondOrderController, SecondOrderGains, ZeroController,
};
use crate::error::{Error, Result};
use crate::plants::{
    fit_matrix_bounds, manipulator_preset, preset, CircleReference, DisturbanceKind, DisturbanceModel, EulerLagrange,
    ManipulatorParams, Preset, MatrixBoundsFit, ReferenceTrajectory, ZeroReference,
};
use crate::sim::{
    energy, integrate, max_after, settling_time, write_csv_file, DoubleIntegrator, ManipulatorPlant, Measure, Plant,
    SimConfig, SimLog,
};
use crate::vecops::{norm2, SgnMode};

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    /// Simulated plant preset.
    pub preset: String,
    /// Model the controller uses; manipulators only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Zero,
    SecondOrder,
    Ptsm,
    Tbg,
    Fixed,
}

impl ControllerKind {
    pub fn manip_law(self) -> Option<ManipLaw> {
        match self {
            ControllerKind::Ptsm => Some(ManipLaw::Ptsm),
            ControllerKind::Tbg => Some(ManipLaw::Tbg),
            ControllerKind::Fixed => Some(ManipLaw::Fixed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub kind: ControllerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_order: Option<SecondOrderGains>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manip: Option<ManipGains>,
    #[serde(default)]
    pub guards: Guards,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSection {
    pub kind: DisturbanceKind,
    #[serde(default)]
    pub bound: f64,
}

/// Initial conditions: either drawn uniformly per seed from the ranges, or
/// fixed when `q0`/`qd0` are given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub q_range: [f64; 2],
    pub qd_range: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qd0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SgnKind {
    Exact,
    Layer,
}

/// Missing keys take their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub horizon: f64,
    pub sgn: SgnKind,
    pub layer_width: f64,
    pub log_decimation: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            horizon: 15.0,
            sgn: SgnKind::Layer,
            layer_width: 1e-3,
            log_decimation: 10,
        }
    }
}

impl SimSection {
    pub fn sgn_mode(&self) -> SgnMode {
        match self.sgn {
            SgnKind::Exact => SgnMode::Exact,
            SgnKind::Layer => SgnMode::BoundaryLayer {
                width: self.layer_width,
            },
        }
    }

    pub fn to_sim_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            dt: self.dt,
            horizon: self.horizon,
            seed,
            sgn: self.sgn_mode(),
            log_decimation: self.log_decimation,
        }
    }
}

/// Hard pass/fail thresholds evaluated on every run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum AcceptanceCheck {
    /// `max ‖series‖∞ < tol` over all logged `t ≥ after`.
    Sustained { measure: Measure, tol: f64, after: f64 },
    /// `settling_time(measure, tol) ≤ deadline`.
    Settling { measure: Measure, tol: f64, deadline: f64 },
    /// `‖s(T_c)‖ ≤ (1 + slack)·√(2ϵV(s(0)) / (λ_min(M0(q(T_c)))(1+ϵ)))`.
    SurfaceBound { slack: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    pub plant: PlantSection,
    pub controller: ControllerSection,
    pub disturbance: DisturbanceSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub sim: SimSection,
    pub bounds: Bounds,
    #[serde(default)]
    pub acceptance: Vec<AcceptanceCheck>,
}

impl ExperimentConfig {
    /// Parse from TOML text; errors carry line and column.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str::<Self>(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            .and_then(|c| c.validate().map(|_| c))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Replace the seed list with `base, base+1, …` of the same length.
    pub fn override_seed(&mut self, base: u64) {
        let n = self.seeds.len() as u64;
        self.seeds = (0..n).map(|k| base.wrapping_add(k)).collect();
    }

    /// Full consistency check; nothing is simulated or written.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("invalid experiment name `{}`", self.name)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        self.sim.to_sim_config(0).validate()?;
        for r in [self.initial.q_range, self.initial.qd_range] {
            if !(r[0] <= r[1]) || !r[0].is_finite() || !r[1].is_finite() {
                return Err(Error::Config(format!("invalid initial range {r:?}")));
            }
        }
        DisturbanceModel::new(self.disturbance.kind, self.disturbance.bound, 0, 1)?;
        for check in &self.acceptance {
            let ok = match *check {
                AcceptanceCheck::Sustained { tol, after, .. } => tol > 0.0 && after >= 0.0,
                AcceptanceCheck::Settling { tol, deadline, .. } => tol > 0.0 && deadline >= 0.0,
                AcceptanceCheck::SurfaceBound { slack } => {
                    slack >= 0.0 && self.controller.kind == ControllerKind::Tbg
                }
            };
            if !ok {
                return Err(Error::Config(format!("invalid acceptance check {check:?}")));
            }
        }
        let built = self.build()?;
        let n = built.plant.dof();
        if let Some(q0) = &self.initial.q0 {
            if q0.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: q0.len() });
            }
        }
        if let Some(qd0) = &self.initial.qd0 {
            if qd0.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: qd0.len() });
            }
        }
        Ok(())
    }

    fn nominal_model(&self) -> Result<Option<ManipulatorParams>> {
        match preset(&self.plant.preset)? {
            Preset::SecondOrder { .. } => {
                if self.plant.nominal.is_some() {
                    return Err(Error::Config("`plant.nominal` applies to manipulators only".into()));
                }
                Ok(None)
            }
            Preset::Manipulator(_) => {
                let name = self.plant.nominal.as_deref().unwrap_or("manip2dof-nominal");
                Ok(Some(manipulator_preset(name)?))
            }
        }
    }

    fn build(&self) -> Result<Built> {
        let sgn = self.sim.sgn_mode();
        let guards = self.controller.guards;
        let kind = self.controller.kind;
        match preset(&self.plant.preset)? {
            Preset::SecondOrder { dim, .. } => {
                self.nominal_model()?;
                let controller: Box<dyn Controller> = match kind {
                    ControllerKind::Zero => Box::new(ZeroController { dim }),
                    ControllerKind::SecondOrder => {
                        let g = self.controller.second_order.clone().ok_or_else(|| {
                            Error::Config("controller kind `second_order` needs [controller.second_order]".into())
                        })?;
                        if g.k_f.len() != dim {
                            return Err(Error::DimensionMismatch {
                                expected: dim,
                                got: g.k_f.len(),
                            });
                        }
                        Box::new(SecondOrderController::new(g, sgn, guards)?)
                    }
                    other => {
                        return Err(Error::Config(format!(
                            "controller kind `{other:?}` needs a manipulator plant"
                        )))
                    }
                };
                Ok(Built {
                    plant: Box::new(DoubleIntegrator { dim }),
                    controller,
                    reference: Box::new(ZeroReference { dim }),
                    nominal: None,
                })
            }
            Preset::Manipulator(truth) => {
                let nominal = self.nominal_model()?.expect("manipulator has a nominal model");
                let dim = truth.dof();
                let controller: Box<dyn Controller> = match kind {
                    ControllerKind::Zero => Box::new(ZeroController { dim }),
                    ControllerKind::SecondOrder => {
                        return Err(Error::Config(
                            "controller kind `second_order` needs the `example1` plant".into(),
                        ))
                    }
                    k => {
                        let g = self.controller.manip.clone().ok_or_else(|| {
                            Error::Config(format!("controller kind `{k:?}` needs [controller.manip]"))
                        })?;
                        let law = k.manip_law().expect("manipulator law");
                        Box::new(ManipController::new(g, law, nominal.clone(), sgn, guards)?)
                    }
                };
                Ok(Built {
                    plant: Box::new(ManipulatorPlant(truth)),
                    controller,
                    reference: Box::new(CircleReference),
                    nominal: Some(nominal),
                })
            }
        }
    }

    /// `(T_s, T_c)` of the configured controller, if it has them.
    pub fn times(&self) -> Option<(f64, f64)> {
        match self.controller.kind {
            ControllerKind::Zero => None,
            ControllerKind::SecondOrder => self.controller.second_order.as_ref().map(|g| (g.t_s, g.t_c)),
            _ => self.controller.manip.as_ref().map(|g| (g.t_s, g.t_c)),
        }
    }

    /// Gain-condition verdict for the configured controller.
    pub fn gain_verdict(&self) -> Option<GainVerdict> {
        match self.controller.kind {
            ControllerKind::Zero => None,
            ControllerKind::SecondOrder => self
                .controller
                .second_order
                .as_ref()
                .map(|g| check_gains(GainCondition::Theorem2, GainSet::SecondOrder(g), self.bounds)),
            k => self.controller.manip.as_ref().map(|g| {
                check_gains(k.manip_law().expect("law").condition(), GainSet::Manip(g), self.bounds)
            }),
        }
    }

    /// Initial `(q, q̇)` for a seed.
    pub fn initial_state(&self, seed: u64, dim: usize) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |r: [f64; 2]| -> Vec<f64> {
            (0..dim)
                .map(|_| if r[0] == r[1] { r[0] } else { rng.gen_range(r[0]..r[1]) })
                .collect()
        };
        let q = draw(self.initial.q_range);
        let qd = draw(self.initial.qd_range);
        (
            self.initial.q0.clone().unwrap_or(q),
            self.initial.qd0.clone().unwrap_or(qd),
        )
    }

    /// Replace `σ̂_m0`, `bounds.sigma_m0` and `K_d` of a manipulator config
    /// with values that satisfy the gain condition for the nominal model:
    /// `σ̄_m0` from a fit of the matrix bounds, `σ̂_m0 = σ̄_m0/2`, and every `K_d`
    /// entry raised to at least `σ̄_d + σ̄_m0·σ̄_α`.
    pub fn use_premise_gains(&mut self) -> Result<MatrixBoundsFit> {
        let name = self.plant.nominal.clone().unwrap_or_else(|| self.plant.preset.clone());
        let nominal = manipulator_preset(&name)?;
        let g = self
            .controller
            .manip
            .as_mut()
            .ok_or_else(|| Error::Config("premise gains need [controller.manip]".into()))?;
        let fit = fit_matrix_bounds(&nominal, PREMISE_FIT_GRID)?;
        g.sigma_hat_m0 = fit.sigma_m / 2.0;
        self.bounds.sigma_m0 = fit.sigma_m;
        let threshold = self.bounds.sigma_d + self.bounds.sigma_m0 * self.bounds.sigma_alpha;
        for k in &mut g.k_d {
            *k = k.max(threshold);
        }
        Ok(fit)
    }
}

const PREMISE_FIT_GRID: usize = 61;

struct Built {
    plant: Box<dyn Plant>,
    controller: Box<dyn Controller>,
    reference: Box<dyn ReferenceTrajectory>,
    nominal: Option<ManipulatorParams>,
}

// ---------------------------------------------------------------------------
// Presets

pub const EXPERIMENT_NAMES: [&str; 5] = ["example1", "example2a", "example2b", "example3", "fixed_time"];

fn example1() -> ExperimentConfig {
    ExperimentConfig {
        name: "example1".into(),
        seeds: (0..10).collect(),
        plant: PlantSection {
            preset: "example1".into(),
            nominal: None,
        },
        controller: ControllerSection {
            kind: ControllerKind::SecondOrder,
            second_order: Some(SecondOrderGains::example1()),
            manip: None,
            guards: Guards::default(),
        },
        disturbance: DisturbanceSection {
            kind: DisturbanceKind::PiecewiseConstantUniform,
            bound: 5.0,
        },
        initial: InitialSection {
            q_range: [-15.0, 15.0],
            qd_range: [-15.0, 15.0],
            q0: None,
            qd0: None,
        },
        sim: SimSection::default(),
        bounds: Bounds {
            sigma_d: 5.0,
            sigma_m0: 0.0,
            sigma_alpha: 0.0,
        },
        acceptance: vec![AcceptanceCheck::Sustained {
            measure: Measure::State,
            tol: 1e-2,
            after: 10.0,
        }],
    }
}

fn manip_base(name: &str, kind: ControllerKind, t_s: f64, t_c: f64) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        seeds: (0..5).collect(),
        plant: PlantSection {
            preset: "manip2dof-true".into(),
            nominal: Some("manip2dof-nominal".into()),
        },
        controller: ControllerSection {
            kind,
            second_order: None,
            manip: Some(ManipGains::example2(t_s, t_c)),
            guards: Guards::default(),
        },
        disturbance: DisturbanceSection {
            kind: DisturbanceKind::PiecewiseConstantUniform,
            bound: 5.0,
        },
        initial: InitialSection {
            q_range: [-5.0, 5.0],
            qd_range: [-5.0, 5.0],
            q0: None,
            qd0: None,
        },
        sim: SimSection::default(),
        bounds: Bounds {
            sigma_d: 5.0,
            sigma_m0: 5.0,
            sigma_alpha: CircleReference::ACCEL_BOUND,
        },
        acceptance: vec![AcceptanceCheck::Sustained {
            measure: Measure::Error,
            tol: 1e-2,
            after: t_s + t_c,
        }],
    }
}

/// One of the built-in experiments.
pub fn experiment_preset(name: &str) -> Result<ExperimentConfig> {
    Ok(match name {
        "example1" => example1(),
        "example2a" => manip_base("example2a", ControllerKind::Ptsm, 4.0, 6.0),
        "example2b" => manip_base("example2b", ControllerKind::Ptsm, 1.0, 1.0),
        "example3" => {
            let mut c = manip_base("example3", ControllerKind::Tbg, 4.0, 6.0);
            c.acceptance = vec![AcceptanceCheck::SurfaceBound { slack: 0.05 }];
            c
        }
        "fixed_time" => {
            let mut c = manip_base("fixed_time", ControllerKind::Fixed, 4.0, 6.0);
            c.disturbance = DisturbanceSection {
                kind: DisturbanceKind::Zero,
                bound: 0.0,
            };
            c.bounds.sigma_d = 0.0;
            let deadline = c.controller.manip.as_ref().expect("gains").fixed_time_settling_bound();
            c.acceptance = vec![AcceptanceCheck::Settling {
                measure: Measure::Error,
                tol: 1e-2,
                deadline,
            }];
            c
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    })
}

/// Configs for the energy comparison: the three manipulator laws on
/// matched seeds, gains of `example2a`, horizon 10 s.
pub fn compare_configs() -> Vec<ExperimentConfig> {
    [
        ("ptsm", ControllerKind::Ptsm),
        ("tbg", ControllerKind::Tbg),
        ("fixed", ControllerKind::Fixed),
    ]
    .into_iter()
    .map(|(name, kind)| {
        let mut c = manip_base(name, kind, 4.0, 6.0);
        c.sim.horizon = 10.0;
        c.acceptance.clear();
        c
    })
    .collect()
}

// ---------------------------------------------------------------------------
// Running

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settling {
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surface: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    /// `∫₀^{min(10, horizon)} ‖τ‖ dt`
    pub energy: f64,
    pub energy_t_end: f64,
    pub final_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_error_after_tf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_surface_after_tc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub experiment: String,
    pub seed: u64,
    pub completed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diverged_at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub pass: bool,
    pub q0: Vec<f64>,
    pub qd0: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub settling: Option<Settling>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Metrics>,
    pub checks: Vec<CheckOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_check: Option<GainVerdict>,
    pub config: ExperimentConfig,
    pub timing: Timing,
}

pub struct RunResult {
    pub summary: RunSummary,
    pub log: Option<SimLog>,
}

const ENERGY_WINDOW: f64 = 10.0;

/// A check whose window lies beyond the logged horizon fails with a NaN
/// value.
fn evaluate_check(check: &AcceptanceCheck, cfg: &ExperimentConfig, nominal: Option<&ManipulatorParams>, log: &SimLog) -> Result<CheckOutcome> {
    let t_last = log.records.last().map_or(f64::NEG_INFINITY, |r| r.t);
    Ok(match *check {
        AcceptanceCheck::Sustained { measure, tol, after } => {
            let v = if after <= t_last + 1e-12 {
                max_after(log, after, measure)
            } else {
                f64::NAN
            };
            CheckOutcome {
                name: format!("sustained_{measure:?}_after_{after}").to_lowercase(),
                pass: v < tol,
                value: v,
                limit: tol,
            }
        }
        AcceptanceCheck::Settling { measure, tol, deadline } => {
            let t = settling_time(log, tol, measure)?.unwrap_or(f64::INFINITY);
            CheckOutcome {
                name: format!("settling_{measure:?}").to_lowercase(),
                pass: t <= deadline,
                value: t,
                limit: deadline,
            }
        }
        AcceptanceCheck::SurfaceBound { slack } => {
            let g = cfg
                .controller
                .manip
                .as_ref()
                .ok_or_else(|| Error::Config("surface_bound check needs manipulator gains".into()))?;
            let nominal = nominal.ok_or_else(|| Error::Config("surface_bound check needs a manipulator".into()))?;
            let (s_tc, limit) = if g.t_c <= t_last + 1e-12 {
                let delta = tbg_surface_bound(log, nominal, g.t_c, g.epsilon)?;
                (log.at(g.t_c).map(|r| norm2(&r.s)).unwrap_or(f64::NAN), delta * (1.0 + slack))
            } else {
                (f64::NAN, f64::NAN)
            };
            CheckOutcome {
                name: "tbg_surface_bound".into(),
                pass: s_tc <= limit,
                value: s_tc,
                limit,
            }
        }
    })
}

/// `√(2ϵV(s(0)) / (λ_min(M0(q(T_c)))(1+ϵ)))` with `V = ½sᵀM0s` from the log.
pub fn tbg_surface_bound(log: &SimLog, nominal: &ManipulatorParams, t_c: f64, epsilon: f64) -> Result<f64> {
    let first = log.records.first().ok_or_else(|| Error::invalid("empty log"))?;
    let at = log.at(t_c).ok_or_else(|| Error::invalid("log ends before T_c"))?;
    let m0 = nominal.manip_matrices(&first.q, &first.qd)?.mass;
    let s0 = nalgebra::DVector::from_column_slice(&first.s);
    let v0 = 0.5 * s0.dot(&(m0 * &s0));
    let lambda = nominal
        .manip_matrices(&at.q, &at.qd)?
        .mass
        .symmetric_eigen()
        .eigenvalues
        .min();
    Ok((2.0 * epsilon * v0 / (lambda * (1.0 + epsilon))).sqrt())
}

/// Simulate one seed and evaluate its checks. Divergence is reported in
/// the summary, not as an error.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<RunResult> {
    let built = cfg.build()?;
    let dim = built.plant.dof();
    let (q0, qd0) = cfg.initial_state(seed, dim);
    let dm = DisturbanceModel::new(cfg.disturbance.kind, cfg.disturbance.bound, seed, dim)?;
    let sim_cfg = cfg.sim.to_sim_config(seed);
    let verdict = cfg.gain_verdict();
    let started = std::time::Instant::now();
    let outcome = integrate(
        &*built.plant,
        &*built.controller,
        &*built.reference,
        &dm,
        &sim_cfg,
        &q0,
        &qd0,
        verdict.clone(),
    );
    let mut summary = RunSummary {
        run_id: format!("{}/run_{seed}", cfg.name),
        experiment: cfg.name.clone(),
        seed,
        completed: false,
        diverged_at: None,
        failure: None,
        pass: false,
        q0,
        qd0,
        settling: None,
        metrics: None,
        checks: Vec::new(),
        gain_check: verdict,
        config: cfg.clone(),
        timing: Timing { wall_clock_s: 0.0 },
    };
    let log = match outcome {
        Ok(log) => log,
        Err(Error::Diverged { t }) => {
            summary.diverged_at = Some(t);
            summary.failure = Some(format!("state diverged at t = {t}"));
            summary.timing.wall_clock_s = started.elapsed().as_secs_f64();
            return Ok(RunResult { summary, log: None });
        }
        Err(e) => return Err(e),
    };
    summary.completed = true;
    let tol = 1e-2;
    summary.settling = Some(Settling {
        tol,
        state: settling_time(&log, tol, Measure::State)?,
        error: settling_time(&log, tol, Measure::Error)?,
        surface: settling_time(&log, tol, Measure::Surface)?,
    });
    let t_last = log.records.last().map_or(0.0, |r| r.t);
    let t_end = ENERGY_WINDOW.min(t_last);
    let times = cfg.times();
    summary.metrics = Some(Metrics {
        energy: energy(&log, t_end)?,
        energy_t_end: t_end,
        final_error: log.records.last().map_or(0.0, |r| crate::vecops::norm_inf(&r.e)),
        max_error_after_tf: times
            .filter(|(ts, tc)| ts + tc <= t_last)
            .map(|(ts, tc)| max_after(&log, ts + tc, Measure::Error)),
        max_surface_after_tc: times
            .filter(|(_, tc)| *tc <= t_last)
            .map(|(_, tc)| max_after(&log, tc, Measure::Surface)),
    });
    for check in &cfg.acceptance {
        summary.checks.push(evaluate_check(check, cfg, built.nominal.as_ref(), &log)?);
    }
    summary.pass = summary.checks.iter().all(|c| c.pass);
    summary.timing.wall_clock_s = log.meta.wall_clock_s;
    Ok(RunResult { summary, log: Some(log) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub seed: u64,
    pub completed: bool,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub settling_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub settling_state: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    pub checks: Vec<CheckOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    /// every run completed and every hard check passed
    pub pass: bool,
    pub runs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_check: Option<GainVerdict>,
    /// Gain-condition failures never affect `pass`.
    pub gain_check_informational: bool,
    pub results: Vec<RunRow>,
}

impl ExperimentReport {
    fn from_summaries(cfg: &ExperimentConfig, summaries: &[RunSummary]) -> Self {
        let results: Vec<RunRow> = summaries
            .iter()
            .map(|s| RunRow {
                seed: s.seed,
                completed: s.completed,
                pass: s.pass,
                settling_error: s.settling.as_ref().and_then(|x| x.error),
                settling_state: s.settling.as_ref().and_then(|x| x.state),
                energy: s.metrics.as_ref().map(|m| m.energy),
                checks: s.checks.clone(),
            })
            .collect();
        Self {
            experiment: cfg.name.clone(),
            pass: results.iter().all(|r| r.completed && r.pass),
            runs: results.len(),
            gain_check: cfg.gain_verdict(),
            gain_check_informational: true,
            results,
        }
    }
}

/// Run every seed of `cfg` on a pool of `jobs` workers (0 = all cores).
/// With `out`, writes `<out>/<name>/run_<seed>/{trajectory.csv, summary.toml}`
/// and `<out>/<name>/{report.toml, config.toml, plot.gp}` once every run
/// has finished.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>, jobs: usize) -> Result<(ExperimentReport, Vec<RunResult>)> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    let results: Vec<RunResult> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| run_seed(cfg, seed))
            .collect::<Result<Vec<_>>>()
    })?;
    let summaries: Vec<RunSummary> = results.iter().map(|r| r.summary.clone()).collect();
    let report = ExperimentReport::from_summaries(cfg, &summaries);
    if let Some(out) = out {
        let dir = out.join(&cfg.name);
        for r in &results {
            let run_dir = dir.join(format!("run_{}", r.summary.seed));
            fs::create_dir_all(&run_dir)?;
            if let Some(log) = &r.log {
                write_csv_file(log, &run_dir.join("trajectory.csv"))?;
            }
            write_toml(&run_dir.join("summary.toml"), &r.summary)?;
        }
        write_toml(&dir.join("report.toml"), &report)?;
        fs::write(dir.join("config.toml"), cfg.to_toml_string()?)?;
        fs::write(dir.join("plot.gp"), plot_script(cfg, &cfg.seeds))?;
    }
    Ok((report, results))
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

/// A gnuplot script drawing phase portraits, tracking errors, surfaces and
/// torques from the per-run CSVs.
pub fn plot_script(cfg: &ExperimentConfig, seeds: &[u64]) -> String {
    let runs: Vec<String> = seeds.iter().map(|s| format!("run_{s}/trajectory.csv")).collect();
    let list = runs.join(" ");
    let mut s = String::new();
    s.push_str(&format!("# {} - run with: gnuplot plot.gp\n", cfg.name));
    s.push_str("set datafile separator ','\nset terminal pngcairo size 1000,700\nset key off\n");
    s.push_str(&format!("files = \"{list}\"\n"));
    let panels = [
        ("phase_1.png", "q1", "qd1", "phase portrait, axis 1"),
        ("phase_2.png", "q2", "qd2", "phase portrait, axis 2"),
        ("error_1.png", "t", "e1", "tracking error e1"),
        ("error_2.png", "t", "e2", "tracking error e2"),
        ("surface.png", "t", "s1", "sliding variable s1"),
        ("torque_1.png", "t", "tau1", "control input 1"),
        ("torque_2.png", "t", "tau2", "control input 2"),
    ];
    for (png, x, y, title) in panels {
        s.push_str(&format!(
            "set output '{png}'\nset title '{title}'\nplot for [f in files] f using '{x}':'{y}' with lines\n"
        ));
    }
    s
}

pub fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

// ---------------------------------------------------------------------------
// Energy comparison

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyRow {
    pub seed: u64,
    pub ptsm: f64,
    pub tbg: f64,
    pub fixed: f64,
    /// `E_tbg < E_ptsm`
    pub tbg_below_ptsm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub t_end: f64,
    pub premise_gains: bool,
    pub pass: bool,
    pub rows: Vec<EnergyRow>,
}

/// Run the three laws on the same seeds and compare `∫₀¹⁰ ‖τ‖ dt`. With
/// `premise_gains` every config goes through
/// [`ExperimentConfig::use_premise_gains`] first.
pub fn run_compare(
    seeds: &[u64],
    sim: Option<SimSection>,
    premise_gains: bool,
    out: Option<&Path>,
    jobs: usize,
) -> Result<CompareReport> {
    let mut energies: Vec<Vec<Option<f64>>> = Vec::new();
    let compare_root = out.map(|o| o.join("compare"));
    for mut cfg in compare_configs() {
        cfg.seeds = seeds.to_vec();
        if let Some(s) = sim {
            cfg.sim = s;
        }
        if premise_gains {
            cfg.use_premise_gains()?;
        }
        let (report, _) = run_experiment(&cfg, compare_root.as_deref(), jobs)?;
        energies.push(report.results.iter().map(|r| r.energy).collect());
    }
    let rows: Vec<EnergyRow> = seeds
        .iter()
        .enumerate()
        .map(|(i, &seed)| {
            let e = |k: usize| energies[k][i].unwrap_or(f64::NAN);
            EnergyRow {
                seed,
                ptsm: e(0),
                tbg: e(1),
                fixed: e(2),
                tbg_below_ptsm: e(1) < e(0),
            }
        })
        .collect();
    let report = CompareReport {
        t_end: ENERGY_WINDOW,
        premise_gains,
        pass: rows.iter().all(|r| r.tbg_below_ptsm),
        rows,
    };
    if let Some(root) = compare_root {
        fs::create_dir_all(&root)?;
        write_toml(&root.join("report.toml"), &report)?;
    }
    Ok(report)
}
