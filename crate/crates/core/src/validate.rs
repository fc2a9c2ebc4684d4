//! Property suites with machine-readable verdicts: manipulator mechanics,
//! time base generator, on-surface PTSM flow and the gain conditions.
//!
//! Every [`PropertyResult`] carries a margin that is positive when the
//! property holds. Informational entries are reported but never affect the
//! overall verdict.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::controllers::{check_gains, Bounds, FixedTimeGains, GainCondition, GainSet, ManipGains, SecondOrderGains};
use crate::error::Result;
use crate::ode::rk4_step;
use crate::plants::{CircleReference, ManipulatorParams};
use crate::sim::{lyapunov_trace, DecrementLaw, LyapunovKind, SimLog};
use crate::surfaces::{integrate_on_surface, SurfaceConfig};
use crate::tbg::{tbg_validate, RippledTbg, TbgPoly};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub pass: bool,
    pub informational: bool,
    pub margin: f64,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offending_t: Option<f64>,
}

impl PropertyResult {
    fn hard(name: &str, margin: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            pass: margin >= 0.0,
            informational: false,
            margin,
            detail,
            offending_t: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub properties: Vec<PropertyResult>,
}

impl ValidationReport {
    pub fn get(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }
}

pub const SKEW_TOL: f64 = 1e-9;

/// `max |δᵀ(Ṁ − 2C)δ|` over random `(q, q̇, δ)` for both parameter sets.
pub fn skew_symmetry(samples: usize, seed: u64) -> Result<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for params in [ManipulatorParams::true_preset(), ManipulatorParams::nominal_preset()] {
        for _ in 0..samples {
            let q = [rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)];
            let qd = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
            let delta = DVector::from_column_slice(&[rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)]);
            let n = params.mass_matrix_dot(&q, &qd)? - 2.0 * params.manip_matrices(&q, &qd)?.coriolis;
            worst = worst.max(delta.dot(&(n * &delta)).abs());
        }
    }
    Ok(PropertyResult::hard(
        "skew_symmetry",
        SKEW_TOL - worst,
        format!("max |d'(Mdot - 2C)d| = {worst:.3e} over {samples} samples per parameter set"),
    ))
}

/// Symmetry and smallest eigenvalue of `M(q)` on a `grid × grid` lattice
/// over `[−π, π]²`.
pub fn mass_positive_definite(grid: usize) -> Result<PropertyResult> {
    let mut min_eig = f64::INFINITY;
    let mut asym: f64 = 0.0;
    let step = 2.0 * PI / (grid.max(2) - 1) as f64;
    for params in [ManipulatorParams::true_preset(), ManipulatorParams::nominal_preset()] {
        for i in 0..grid {
            for j in 0..grid {
                let q = [-PI + i as f64 * step, -PI + j as f64 * step];
                let m = params.manip_matrices(&q, &[0.0, 0.0])?.mass;
                asym = asym.max((&m - m.transpose()).abs().max());
                min_eig = min_eig.min(m.symmetric_eigen().eigenvalues.min());
            }
        }
    }
    let mut r = PropertyResult::hard(
        "mass_symmetric_positive_definite",
        min_eig,
        format!("min eigenvalue {min_eig:.4}, max asymmetry {asym:.1e}, {grid}x{grid} grid"),
    );
    r.pass = r.pass && min_eig > 0.0 && asym == 0.0;
    Ok(r)
}

/// Endpoint, monotonicity and slope checks of the polynomial time base.
pub fn tbg_properties(t_c: f64) -> Result<PropertyResult> {
    let report = tbg_validate(&TbgPoly::new(t_c)?, 10_000)?;
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    Ok(PropertyResult {
        name: "tbg_properties".into(),
        pass: failed.is_empty(),
        informational: false,
        margin: if failed.is_empty() { 0.0 } else { -(failed.len() as f64) },
        detail: if failed.is_empty() {
            format!("all {} checks pass for T_c = {t_c}", report.checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
        offending_t: report.checks.iter().find_map(|c| c.offending_t),
    })
}

/// Negative control: a rippled time base must be flagged as non-monotone.
/// Passes when the failure is detected, and reports the offending `t`.
pub fn tbg_negative_control(t_c: f64) -> Result<PropertyResult> {
    let bad = RippledTbg {
        base: TbgPoly::new(t_c)?,
        amplitude: 0.05,
    };
    let report = tbg_validate(&bad, 10_000)?;
    let mono = report.check("non_decreasing").expect("monotonicity check present");
    let detected = !mono.pass;
    Ok(PropertyResult {
        name: "tbg_negative_control".into(),
        pass: detected,
        informational: false,
        margin: if detected { 0.0 } else { -1.0 },
        detail: format!("rippled profile: {}", mono.detail),
        offending_t: mono.offending_t,
    })
}

pub const TBG_FLOW_REL_TOL: f64 = 1e-3;

/// `ẋ = −φ(t)x` integrated to `T_c` against `x(T_c) = x0·ϵ/(1+ϵ)`.
pub fn tbg_gain_flow(t_c: f64) -> Result<PropertyResult> {
    let g = TbgPoly::new(t_c)?;
    let dt = 1e-4;
    let steps = (t_c / dt).round() as usize;
    let mut worst: f64 = 0.0;
    for eps in [0.1, 0.01] {
        g.gain(0.0, eps)?;
        for x0 in [1.0, -50.0, 1e3] {
            let mut x = vec![x0];
            for k in 0..steps {
                let t = k as f64 * dt;
                x = rk4_step(|t, y| vec![-g.gain(t, eps).unwrap_or(0.0) * y[0]], t, &x, dt);
            }
            let expected = x0 * eps / (1.0 + eps);
            worst = worst.max(((x[0] - expected) / expected).abs());
        }
    }
    Ok(PropertyResult::hard(
        "tbg_gain_closed_form",
        TBG_FLOW_REL_TOL - worst,
        format!("max relative error {worst:.3e} over eps in {{0.1, 0.01}}"),
    ))
}

pub const PTSM_FLOW_FINAL_TOL: f64 = 1e-3;
pub const PTSM_FLOW_RATE_TOL: f64 = 0.01;
const PTSM_FLOW_DT: f64 = 1e-3;

/// On-surface PTSM flow for `T_s ∈ {1,4,10}`, `γ ∈ {0.3,0.5,0.7}` and
/// `per_case` random `x0 ∈ [−10⁴, 10⁴]`: `|x(T_s)|` and the rate of the
/// Lyapunov function while `|x| > 10⁻³`.
pub fn ptsm_flow_suite(per_case: usize, seed: u64) -> Result<(PropertyResult, PropertyResult)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    for t_s in [1.0, 4.0, 10.0] {
        for gamma in [0.3, 0.5, 0.7] {
            for _ in 0..per_case {
                cases.push((t_s, gamma, rng.gen_range(-1e4..1e4)));
            }
        }
    }
    let results: Vec<(f64, f64, usize)> = cases
        .par_iter()
        .map(|&(t_s, gamma, x0): &(f64, f64, f64)| {
            let cfg = SurfaceConfig::ptsm(t_s, gamma)?;
            let flow = integrate_on_surface(&cfg, &[x0], t_s, PTSM_FLOW_DT)?;
            let final_x = flow.x.last().map_or(f64::NAN, |x| x[0].abs());
            let log = SimLog::from_surface_flow(&flow);
            let rep = lyapunov_trace(
                &log,
                LyapunovKind::PtsmScalar { gamma },
                DecrementLaw::Constant { rate: 1.0 / t_s },
                PTSM_FLOW_FINAL_TOL,
                PTSM_FLOW_RATE_TOL,
            )?;
            Ok((final_x, rep.max_rel_error, rep.n_violations))
        })
        .collect::<Result<_>>()?;
    let worst_final = results.iter().fold(0.0f64, |m, r| m.max(r.0));
    let worst_rate = results.iter().fold(0.0f64, |m, r| m.max(r.1));
    let violations: usize = results.iter().map(|r| r.2).sum();
    let settle = PropertyResult::hard(
        "ptsm_flow_settling",
        PTSM_FLOW_FINAL_TOL - worst_final,
        format!("max |x(T_s)| = {worst_final:.3e} over {} flows", results.len()),
    );
    let mut rate = PropertyResult::hard(
        "ptsm_flow_lyapunov_rate",
        PTSM_FLOW_RATE_TOL - worst_rate,
        format!("max relative error of Vdot against -1/T_s = {worst_rate:.3e}, {violations} violations"),
    );
    rate.pass = rate.pass && violations == 0;
    Ok((settle, rate))
}

/// Fixed-time reaching bound plugged in for `α = β = 1`, `(m1,n1,m2,n2) =
/// (5,3,3,5)`, `T_s = 4`; must equal 11.
pub fn fixed_time_bound() -> PropertyResult {
    let g = ManipGains {
        fixed: FixedTimeGains::default(),
        ..ManipGains::example2(4.0, 6.0)
    };
    let bound = g.fixed_time_settling_bound();
    PropertyResult::hard(
        "fixed_time_settling_bound",
        1e-12 - (bound - 11.0).abs(),
        format!("T_s + 2n1/(a(m1-n1)) + (n2+m2)/(b(n2-m2)) = {bound}"),
    )
}

/// Gain conditions for the built-in gain sets. The second-order and
/// fixed-time checks are hard; the manipulator PTSM check with disturbance,
/// mass and reference bounds of 5 is informational.
pub fn gain_checks() -> Vec<PropertyResult> {
    let verdict_row = |name: &str, v: crate::controllers::GainVerdict, informational: bool| PropertyResult {
        name: name.into(),
        pass: v.pass,
        informational,
        margin: v.margin,
        detail: format!(
            "{:?}: lambda_min {} vs threshold {}{}",
            v.condition,
            v.lambda_min,
            v.threshold,
            if v.notes.is_empty() { String::new() } else { format!(" ({})", v.notes.join("; ")) }
        ),
        offending_t: None,
    };
    let so = SecondOrderGains::example1();
    let manip = ManipGains::example2(4.0, 6.0);
    vec![
        verdict_row(
            "gains_example1",
            check_gains(
                GainCondition::Theorem2,
                GainSet::SecondOrder(&so),
                Bounds {
                    sigma_d: 5.0,
                    sigma_m0: 0.0,
                    sigma_alpha: 0.0,
                },
            ),
            false,
        ),
        verdict_row(
            "gains_example2",
            check_gains(
                GainCondition::Theorem3,
                GainSet::Manip(&manip),
                Bounds {
                    sigma_d: 5.0,
                    sigma_m0: 5.0,
                    sigma_alpha: CircleReference::ACCEL_BOUND,
                },
            ),
            true,
        ),
        verdict_row(
            "gains_fixed_time",
            check_gains(
                GainCondition::Corollary2,
                GainSet::Manip(&manip),
                Bounds {
                    sigma_d: 0.0,
                    sigma_m0: 5.0,
                    sigma_alpha: CircleReference::ACCEL_BOUND,
                },
            ),
            false,
        ),
    ]
}

/// Run every suite.
pub fn validate_all() -> Result<ValidationReport> {
    let mut properties = vec![
        skew_symmetry(1000, 11)?,
        mass_positive_definite(50)?,
        tbg_properties(6.0)?,
        tbg_negative_control(6.0)?,
        tbg_gain_flow(6.0)?,
    ];
    let (settle, rate) = ptsm_flow_suite(20, 5)?;
    properties.push(settle);
    properties.push(rate);
    properties.push(fixed_time_bound());
    properties.extend(gain_checks());
    let pass = properties.iter().filter(|p| !p.informational).all(|p| p.pass);
    Ok(ValidationReport { pass, properties })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_suites_pass() {
        assert!(skew_symmetry(200, 1).unwrap().pass);
        assert!(mass_positive_definite(20).unwrap().pass);
        assert!(tbg_properties(6.0).unwrap().pass);
        assert!(tbg_gain_flow(6.0).unwrap().pass);
        assert!(fixed_time_bound().pass);
    }

    #[test]
    fn negative_control_reports_offending_time() {
        let r = tbg_negative_control(6.0).unwrap();
        assert!(r.pass);
        let t = r.offending_t.unwrap();
        assert!(t > 0.0 && t < 6.0);
    }

    #[test]
    fn example2_margin_is_informational() {
        let rows = gain_checks();
        let ex2 = rows.iter().find(|r| r.name == "gains_example2").unwrap();
        assert!(ex2.informational && !ex2.pass);
        assert_eq!(ex2.margin, -5.0);
        let ex1 = rows.iter().find(|r| r.name == "gains_example1").unwrap();
        assert!(ex1.pass && ex1.margin == 5.0);
        assert!(rows.iter().filter(|r| !r.informational).all(|r| r.pass));
    }
}
