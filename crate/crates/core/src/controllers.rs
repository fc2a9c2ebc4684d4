//! Control laws: the second-order PTSM controller, the manipulator PTSM,
//! TBG-based and fixed-time controllers, and the gain-condition checker.
//!
//! Every law is a pure map from `(t, measured state, reference)` to torque.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plants::{EulerLagrange, ManipulatorParams, RefSample};
use crate::surfaces::{check_fixed_time_exponents, check_positive, Ptsm};
use crate::tbg::TbgPoly;
use crate::vecops::{norm2, sgn_reg_scalar, sig_pow_scalar, SgnMode};

/// Numerical guards for the two singular terms of the laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Guards {
    /// Below this `‖s‖` the `s/‖s‖^ρ` term is set to zero.
    pub s_norm_floor: f64,
    /// Lower clamp on `|e|/√(1+e²)` before raising it to `γ − 1`;
    /// `None` disables the clamp.
    pub base_floor: Option<f64>,
}

impl Default for Guards {
    fn default() -> Self {
        Self {
            s_norm_floor: 1e-9,
            base_floor: Some(1e-6),
        }
    }
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::invalid(format!("{name} must lie in (0, 1), got {v}")));
    }
    Ok(())
}

fn check_diag(name: &str, k: &[f64]) -> Result<()> {
    if k.is_empty() || k.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::invalid(format!(
            "{name} must be a non-empty positive diagonal, got {k:?}"
        )));
    }
    Ok(())
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn lambda_min(diag: &[f64]) -> f64 {
    diag.iter().copied().fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------
// Gains

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondOrderGains {
    pub t_s: f64,
    pub t_c: f64,
    pub gamma: f64,
    pub rho: f64,
    /// diagonal of `K_f`
    pub k_f: Vec<f64>,
}

impl SecondOrderGains {
    /// γ = 0.5, ρ = 0.4, T_s = 4, T_c = 6, K_f = 10·I₂.
    pub fn example1() -> Self {
        Self {
            t_s: 4.0,
            t_c: 6.0,
            gamma: 0.5,
            rho: 0.4,
            k_f: vec![10.0, 10.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("T_s", self.t_s)?;
        check_positive("T_c", self.t_c)?;
        check_unit_interval("gamma", self.gamma)?;
        check_unit_interval("rho", self.rho)?;
        check_diag("K_f", &self.k_f)
    }

    pub fn surface(&self) -> Ptsm {
        Ptsm {
            t_s: self.t_s,
            gamma: self.gamma,
        }
    }
}

/// Exponents and gains of the fixed-time hitting law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedTimeGains {
    pub alpha: f64,
    pub beta: f64,
    pub m1: u32,
    pub n1: u32,
    pub m2: u32,
    pub n2: u32,
}

impl Default for FixedTimeGains {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            m1: 5,
            n1: 3,
            m2: 3,
            n2: 5,
        }
    }
}

impl FixedTimeGains {
    pub fn validate(&self) -> Result<()> {
        check_positive("alpha", self.alpha)?;
        check_positive("beta", self.beta)?;
        check_fixed_time_exponents(self.m1, self.n1, self.m2, self.n2)
    }

    /// Reaching-phase bound `2n1/(α(m1−n1)) + (n2+m2)/(β(n2−m2))`.
    pub fn reaching_bound(&self) -> f64 {
        let (m1, n1, m2, n2) = (
            self.m1 as f64,
            self.n1 as f64,
            self.m2 as f64,
            self.n2 as f64,
        );
        2.0 * n1 / (self.alpha * (m1 - n1)) + (n2 + m2) / (self.beta * (n2 - m2))
    }
}

fn default_epsilon() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManipGains {
    pub t_s: f64,
    pub t_c: f64,
    pub gamma: f64,
    pub rho: f64,
    /// diagonal of `K_d`
    pub k_d: Vec<f64>,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    /// `σ̂_m0 = σ̄_m0 / 2`
    pub sigma_hat_m0: f64,
    /// TBG offset ϵ
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub fixed: FixedTimeGains,
}

impl ManipGains {
    /// γ = ρ = 0.5, σ̄ = (14, 12, 10), K_d = 25·I₂, σ̂_m0 = 2.5, ϵ = 0.1.
    pub fn example2(t_s: f64, t_c: f64) -> Self {
        Self {
            t_s,
            t_c,
            gamma: 0.5,
            rho: 0.5,
            k_d: vec![25.0, 25.0],
            sigma1: 14.0,
            sigma2: 12.0,
            sigma3: 10.0,
            sigma_hat_m0: 2.5,
            epsilon: 0.1,
            fixed: FixedTimeGains::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("T_s", self.t_s)?;
        check_positive("T_c", self.t_c)?;
        check_unit_interval("gamma", self.gamma)?;
        check_unit_interval("rho", self.rho)?;
        check_diag("K_d", &self.k_d)?;
        for (name, v) in [
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
            ("sigma3", self.sigma3),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        check_positive("sigma_hat_m0", self.sigma_hat_m0)?;
        check_positive("epsilon", self.epsilon)?;
        self.fixed.validate()
    }

    pub fn surface(&self) -> Ptsm {
        Ptsm {
            t_s: self.t_s,
            gamma: self.gamma,
        }
    }

    /// Settling bound of the fixed-time variant: `T_s` plus the reaching bound.
    pub fn fixed_time_settling_bound(&self) -> f64 {
        self.t_s + self.fixed.reaching_bound()
    }
}

// ---------------------------------------------------------------------------
// Shared terms

/// `s = ė + drift(e)` and `drift_rate(e, ė)`, componentwise.
pub fn surface_and_rate(p: &Ptsm, e: &[f64], edot: &[f64], guards: Guards) -> (Vec<f64>, Vec<f64>) {
    let s = e.iter().zip(edot).map(|(&x, &xd)| xd + p.drift(x)).collect();
    let r = e
        .iter()
        .zip(edot)
        .map(|(&x, &xd)| p.drift_rate(x, xd, guards.base_floor))
        .collect();
    (s, r)
}

/// `−(π/(ρT_c))(lo + hi‖s‖^{2ρ}) s/‖s‖^ρ`, zero below the guard floor.
pub fn predefined_hitting(s: &[f64], rho: f64, t_c: f64, lo: f64, hi: f64, guards: Guards) -> Vec<f64> {
    let n = norm2(s);
    if n < guards.s_norm_floor {
        return vec![0.0; s.len()];
    }
    let k = PI / (rho * t_c) * (lo + hi * n.powf(2.0 * rho)) / n.powf(rho);
    s.iter().map(|v| -k * v).collect()
}

/// `−[(σ̄1 + σ̄2‖q‖ + σ̄3‖q̇‖²) + K_d,ii]·sgn(s_i) − (C0 s)_i`.
fn robust_terms(g: &ManipGains, s: &[f64], q: &[f64], qdot: &[f64], c0: &DMatrix<f64>, sgn: SgnMode) -> Vec<f64> {
    let qd = norm2(qdot);
    let bound = g.sigma1 + g.sigma2 * norm2(q) + g.sigma3 * qd * qd;
    let cs = c0 * DVector::from_column_slice(s);
    s.iter()
        .enumerate()
        .map(|(i, &si)| -(bound + g.k_d[i]) * sgn_reg_scalar(si, sgn) - cs[i])
        .collect()
}

// ---------------------------------------------------------------------------
// Laws

/// Second-order PTSM law `τ = τ_eq + τ_s` for `ξ̇ = η, η̇ = τ + f`.
pub fn so_tau(g: &SecondOrderGains, xi: &[f64], eta: &[f64], sgn: SgnMode, guards: Guards) -> Result<Vec<f64>> {
    check_len(xi.len(), eta.len())?;
    check_len(xi.len(), g.k_f.len())?;
    let (s, rate) = surface_and_rate(&g.surface(), xi, eta, guards);
    let hit = predefined_hitting(&s, g.rho, g.t_c, 1.0, 1.0, guards);
    Ok((0..s.len())
        .map(|i| -rate[i] + hit[i] - g.k_f[i] * sgn_reg_scalar(s[i], sgn))
        .collect())
}

/// Manipulator equivalent control `−M0·drift_rate(e, ė) + C0 q̇ + g0`.
#[allow(clippy::too_many_arguments)]
pub fn manip_tau_eq(
    g: &ManipGains,
    e: &[f64],
    edot: &[f64],
    m0: &DMatrix<f64>,
    c0: &DMatrix<f64>,
    g0: &DVector<f64>,
    qdot: &[f64],
    guards: Guards,
) -> Result<Vec<f64>> {
    let n = e.len();
    check_len(n, edot.len())?;
    check_len(n, qdot.len())?;
    check_len(n, g0.len())?;
    let p = g.surface();
    let rate: Vec<f64> = e
        .iter()
        .zip(edot)
        .map(|(&x, &xd)| p.drift_rate(x, xd, guards.base_floor))
        .collect();
    let tau = -(m0 * DVector::from_vec(rate)) + c0 * DVector::from_column_slice(qdot) + g0;
    Ok(tau.as_slice().to_vec())
}

/// PTSM hitting law with `σ̂_m0` powers.
pub fn manip_tau_s_ptsm(
    g: &ManipGains,
    s: &[f64],
    q: &[f64],
    qdot: &[f64],
    c0: &DMatrix<f64>,
    sgn: SgnMode,
    guards: Guards,
) -> Result<Vec<f64>> {
    check_len(g.k_d.len(), s.len())?;
    let sh = g.sigma_hat_m0;
    let hit = predefined_hitting(
        s,
        g.rho,
        g.t_c,
        sh.powf(1.0 - g.rho / 2.0),
        sh.powf(1.0 + g.rho / 2.0),
        guards,
    );
    let rob = robust_terms(g, s, q, qdot, c0, sgn);
    Ok(hit.iter().zip(&rob).map(|(a, b)| a + b).collect())
}

/// TBG hitting law: robust terms minus `σ̂_m0·φ(t)·s`.
#[allow(clippy::too_many_arguments)]
pub fn manip_tau_s_tbg(
    g: &ManipGains,
    tbg: &TbgPoly,
    t: f64,
    s: &[f64],
    q: &[f64],
    qdot: &[f64],
    c0: &DMatrix<f64>,
    sgn: SgnMode,
) -> Result<Vec<f64>> {
    check_len(g.k_d.len(), s.len())?;
    let phi = tbg.gain(t, g.epsilon)?;
    let rob = robust_terms(g, s, q, qdot, c0, sgn);
    Ok(rob
        .iter()
        .zip(s)
        .map(|(r, si)| r - g.sigma_hat_m0 * phi * si)
        .collect())
}

/// Fixed-time hitting law with odd-ratio powers of `s`.
pub fn manip_tau_s_fixed(
    g: &ManipGains,
    s: &[f64],
    q: &[f64],
    qdot: &[f64],
    c0: &DMatrix<f64>,
    sgn: SgnMode,
) -> Result<Vec<f64>> {
    check_len(g.k_d.len(), s.len())?;
    let f = &g.fixed;
    f.validate()?;
    let (m1, n1, m2, n2) = (f.m1 as f64, f.n1 as f64, f.m2 as f64, f.n2 as f64);
    let ka = f.alpha * g.sigma_hat_m0.powf((m1 + n1) / (2.0 * n1));
    let kb = f.beta * g.sigma_hat_m0.powf((m2 + n2) / (2.0 * n2));
    let rob = robust_terms(g, s, q, qdot, c0, sgn);
    Ok(rob
        .iter()
        .zip(s)
        .map(|(r, &si)| r - ka * sig_pow_scalar(si, m1 / n1) - kb * sig_pow_scalar(si, m2 / n2))
        .collect())
}

// ---------------------------------------------------------------------------
// Gain conditions

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainCondition {
    Theorem2,
    Theorem3,
    Corollary1,
    Corollary2,
}

/// Uncertainty bounds assumed by the gain conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    /// `σ̄_d` for the manipulator, `σ̄_f` for the second-order chain
    pub sigma_d: f64,
    #[serde(default)]
    pub sigma_m0: f64,
    #[serde(default)]
    pub sigma_alpha: f64,
}

pub enum GainSet<'a> {
    SecondOrder(&'a SecondOrderGains),
    Manip(&'a ManipGains),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainVerdict {
    pub condition: GainCondition,
    pub pass: bool,
    pub lambda_min: f64,
    pub threshold: f64,
    /// `λ_min − threshold`
    pub margin: f64,
    pub notes: Vec<String>,
}

/// Check the sufficient gain condition of the chosen result.
pub fn check_gains(condition: GainCondition, gains: GainSet<'_>, bounds: Bounds) -> GainVerdict {
    let mut notes = Vec::new();
    if [bounds.sigma_d, bounds.sigma_m0, bounds.sigma_alpha]
        .iter()
        .any(|b| !(*b >= 0.0))
    {
        notes.push("bounds must be nonnegative".to_string());
    }
    let (lambda, threshold, valid) = match (condition, gains) {
        (GainCondition::Theorem2, GainSet::SecondOrder(g)) => {
            let ok = g.validate().map_err(|e| notes.push(e.to_string())).is_ok();
            (lambda_min(&g.k_f), bounds.sigma_d, ok)
        }
        (GainCondition::Theorem2, GainSet::Manip(_)) => {
            notes.push("condition needs second-order gains".into());
            (f64::NAN, f64::NAN, false)
        }
        (_, GainSet::SecondOrder(_)) => {
            notes.push("condition needs manipulator gains".into());
            (f64::NAN, f64::NAN, false)
        }
        (_, GainSet::Manip(g)) => {
            let ok = g.validate().map_err(|e| notes.push(e.to_string())).is_ok();
            (
                lambda_min(&g.k_d),
                bounds.sigma_d + bounds.sigma_m0 * bounds.sigma_alpha,
                ok,
            )
        }
    };
    let margin = lambda - threshold;
    let pass = valid && notes.is_empty() && margin >= 0.0;
    if valid && margin < 0.0 {
        notes.push(format!(
            "lambda_min = {lambda} is below the required {threshold}"
        ));
    }
    GainVerdict {
        condition,
        pass,
        lambda_min: lambda,
        threshold,
        margin,
        notes,
    }
}

// ---------------------------------------------------------------------------
// Controllers as closed-loop components

/// One controller evaluation: torque and the quantities logged with it.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSample {
    pub tau: Vec<f64>,
    pub e: Vec<f64>,
    pub edot: Vec<f64>,
    pub s: Vec<f64>,
    /// Lyapunov candidate at this sample
    pub v: f64,
}

pub trait Controller: Send + Sync {
    fn dof(&self) -> usize;

    fn control(&self, t: f64, q: &[f64], qdot: &[f64], r: &RefSample) -> Result<ControlSample>;
}

fn errors(q: &[f64], qdot: &[f64], r: &RefSample) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(r.q.len(), q.len())?;
    check_len(r.w.len(), qdot.len())?;
    Ok((
        q.iter().zip(&r.q).map(|(a, b)| a - b).collect(),
        qdot.iter().zip(&r.w).map(|(a, b)| a - b).collect(),
    ))
}

/// Applies zero torque; `s` is reported as `ė + e`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroController {
    pub dim: usize,
}

impl Controller for ZeroController {
    fn dof(&self) -> usize {
        self.dim
    }

    fn control(&self, _t: f64, q: &[f64], qdot: &[f64], r: &RefSample) -> Result<ControlSample> {
        let (e, edot) = errors(q, qdot, r)?;
        let s: Vec<f64> = e.iter().zip(&edot).map(|(a, b)| a + b).collect();
        let v = 0.5 * s.iter().map(|x| x * x).sum::<f64>();
        Ok(ControlSample {
            tau: vec![0.0; self.dim],
            e,
            edot,
            s,
            v,
        })
    }
}

/// Second-order PTSM controller; `V = ½sᵀs`.
#[derive(Debug, Clone)]
pub struct SecondOrderController {
    pub gains: SecondOrderGains,
    pub sgn: SgnMode,
    pub guards: Guards,
}

impl SecondOrderController {
    pub fn new(gains: SecondOrderGains, sgn: SgnMode, guards: Guards) -> Result<Self> {
        gains.validate()?;
        Ok(Self { gains, sgn, guards })
    }
}

impl Controller for SecondOrderController {
    fn dof(&self) -> usize {
        self.gains.k_f.len()
    }

    fn control(&self, _t: f64, q: &[f64], qdot: &[f64], r: &RefSample) -> Result<ControlSample> {
        let (e, edot) = errors(q, qdot, r)?;
        let tau = so_tau(&self.gains, &e, &edot, self.sgn, self.guards)?;
        let (s, _) = surface_and_rate(&self.gains.surface(), &e, &edot, self.guards);
        let v = 0.5 * s.iter().map(|x| x * x).sum::<f64>();
        Ok(ControlSample { tau, e, edot, s, v })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManipLaw {
    Ptsm,
    Tbg,
    Fixed,
}

impl ManipLaw {
    pub fn condition(self) -> GainCondition {
        match self {
            ManipLaw::Ptsm => GainCondition::Theorem3,
            ManipLaw::Tbg => GainCondition::Corollary1,
            ManipLaw::Fixed => GainCondition::Corollary2,
        }
    }
}

/// Manipulator tracking controller built on the nominal model; `V = ½sᵀM0s`.
#[derive(Debug, Clone)]
pub struct ManipController<N = ManipulatorParams> {
    pub gains: ManipGains,
    pub law: ManipLaw,
    pub nominal: N,
    pub sgn: SgnMode,
    pub guards: Guards,
    tbg: TbgPoly,
}

impl<N: EulerLagrange> ManipController<N> {
    pub fn new(gains: ManipGains, law: ManipLaw, nominal: N, sgn: SgnMode, guards: Guards) -> Result<Self> {
        gains.validate()?;
        check_len(nominal.dof(), gains.k_d.len())?;
        let tbg = TbgPoly::new(gains.t_c)?;
        Ok(Self {
            gains,
            law,
            nominal,
            sgn,
            guards,
            tbg,
        })
    }
}

impl<N: EulerLagrange> Controller for ManipController<N> {
    fn dof(&self) -> usize {
        self.nominal.dof()
    }

    fn control(&self, t: f64, q: &[f64], qdot: &[f64], r: &RefSample) -> Result<ControlSample> {
        let (e, edot) = errors(q, qdot, r)?;
        let dy = self.nominal.dynamics(q, qdot)?;
        let g = &self.gains;
        let tau_eq = manip_tau_eq(g, &e, &edot, &dy.mass, &dy.coriolis, &dy.gravity, qdot, self.guards)?;
        let (s, _) = surface_and_rate(&g.surface(), &e, &edot, self.guards);
        let tau_s = match self.law {
            ManipLaw::Ptsm => manip_tau_s_ptsm(g, &s, q, qdot, &dy.coriolis, self.sgn, self.guards)?,
            ManipLaw::Tbg => manip_tau_s_tbg(g, &self.tbg, t, &s, q, qdot, &dy.coriolis, self.sgn)?,
            ManipLaw::Fixed => manip_tau_s_fixed(g, &s, q, qdot, &dy.coriolis, self.sgn)?,
        };
        let sv = DVector::from_column_slice(&s);
        let v = 0.5 * sv.dot(&(&dy.mass * &sv));
        let tau = tau_eq.iter().zip(&tau_s).map(|(a, b)| a + b).collect();
        Ok(ControlSample { tau, e, edot, s, v })
    }
}
