//! Time base generator `ε(t)` and the time-varying gain
//! `φ(t) = ε̇ / (1 − ε + ϵ)` built from it.
//!
//! The profile is the quintic-smooth polynomial `ε(τ) = 10τ⁶ − 24τ⁵ + 15τ⁴`
//! with `τ = t / T_c`, held at one after `T_c`. It satisfies `ε(0) = 0`,
//! `ε(T_c) = 1`, zero slope at both ends and is monotone on `[0, T_c]`.
//!
//! Note: the variant written for `T_c = 6` as
//! `10t⁶/6⁶ − 24t⁵/6⁶ + 15t⁴/6⁴` evaluates to 21 at `t = 6`. Only the
//! normalized form (all denominators `6^k` matching the power) is a valid
//! time base; that is what is implemented here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A profile rising from 0 at `t = 0` to 1 at `t = t_c`.
pub trait TimeBase {
    fn t_c(&self) -> f64;

    /// `(ε(t), ε̇(t))` for `t ≥ 0`.
    fn eval(&self, t: f64) -> (f64, f64);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TbgPoly {
    t_c: f64,
}

impl TbgPoly {
    pub fn new(t_c: f64) -> Result<Self> {
        if !(t_c > 0.0 && t_c.is_finite()) {
            return Err(Error::invalid(format!("T_c must be positive, got {t_c}")));
        }
        Ok(Self { t_c })
    }

    /// `(ε, ε̇)` at `t`; rejects negative time.
    pub fn tbg_eval(&self, t: f64) -> Result<(f64, f64)> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeTime(t));
        }
        Ok(self.eval(t))
    }

    /// `φ(t) = ε̇ / (1 − ε + ϵ)`.
    pub fn gain(&self, t: f64, epsilon: f64) -> Result<f64> {
        if !(epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        let (e, ed) = self.tbg_eval(t)?;
        Ok(ed / (1.0 - e + epsilon))
    }
}

impl TimeBase for TbgPoly {
    fn t_c(&self) -> f64 {
        self.t_c
    }

    fn eval(&self, t: f64) -> (f64, f64) {
        if t > self.t_c {
            return (1.0, 0.0);
        }
        let tau = (t / self.t_c).clamp(0.0, 1.0);
        let t4 = tau * tau * tau * tau;
        let eps = t4 * (15.0 + tau * (-24.0 + 10.0 * tau));
        let eps_dot = 60.0 / self.t_c * tau * tau * tau * (tau - 1.0) * (tau - 1.0);
        (eps, eps_dot)
    }
}

/// Negative-control fixture: the polynomial profile plus a ripple that
/// breaks monotonicity while keeping the endpoint values.
#[derive(Debug, Clone, Copy)]
pub struct RippledTbg {
    pub base: TbgPoly,
    pub amplitude: f64,
}

impl TimeBase for RippledTbg {
    fn t_c(&self) -> f64 {
        self.base.t_c
    }

    fn eval(&self, t: f64) -> (f64, f64) {
        let (e, ed) = self.base.eval(t);
        if t > self.base.t_c {
            return (e, ed);
        }
        let w = 2.0 * std::f64::consts::PI * 4.0 / self.base.t_c;
        (
            e + self.amplitude * (w * t).sin(),
            ed + self.amplitude * w * (w * t).cos(),
        )
    }
}

/// One named property check with its measured margin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
    /// First time at which the property failed, if it did.
    pub offending_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TbgReport {
    pub checks: Vec<PropertyCheck>,
}

impl TbgReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const ENDPOINT_TOL: f64 = 1e-12;
const JUMP_TOL: f64 = 1e-9;

/// Check the time-base properties on a uniform grid of `samples` intervals
/// over `[0, T_c]`: endpoint values and slopes, non-decrease, non-negative
/// slope, and continuity of `ε̇` across `T_c`.
pub fn tbg_validate<G: TimeBase + ?Sized>(g: &G, samples: usize) -> Result<TbgReport> {
    if samples < 100 {
        return Err(Error::invalid(format!("need at least 100 samples, got {samples}")));
    }
    let tc = g.t_c();
    let mut checks = Vec::new();

    let (e0, ed0) = g.eval(0.0);
    let (e1, ed1) = g.eval(tc);
    let (e_after, ed_after) = g.eval(1.5 * tc);
    let endpoint_err = [e0, e1 - 1.0, ed0, ed1, e_after - 1.0, ed_after]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    checks.push(PropertyCheck {
        name: "endpoints".into(),
        pass: endpoint_err < ENDPOINT_TOL,
        detail: format!("max endpoint error {endpoint_err:.3e}"),
        offending_t: None,
    });

    let grid: Vec<f64> = (0..=samples).map(|k| tc * k as f64 / samples as f64).collect();
    let vals: Vec<(f64, f64)> = grid.iter().map(|&t| g.eval(t)).collect();

    let first_drop = vals
        .windows(2)
        .position(|w| w[1].0 < w[0].0 - 1e-15)
        .map(|k| grid[k + 1]);
    checks.push(PropertyCheck {
        name: "non_decreasing".into(),
        pass: first_drop.is_none(),
        detail: match first_drop {
            Some(t) => format!("epsilon decreases at t = {t}"),
            None => "epsilon non-decreasing on grid".into(),
        },
        offending_t: first_drop,
    });

    let first_negative = vals.iter().position(|v| v.1 < 0.0).map(|k| grid[k]);
    checks.push(PropertyCheck {
        name: "slope_non_negative".into(),
        pass: first_negative.is_none(),
        detail: match first_negative {
            Some(t) => format!("epsilon_dot negative at t = {t}"),
            None => "epsilon_dot >= 0 on grid".into(),
        },
        offending_t: first_negative,
    });

    let left = g.eval(tc * (1.0 - 1e-6));
    let right = g.eval(tc * (1.0 + 1e-6));
    let jump = (left.1 - right.1).abs();
    checks.push(PropertyCheck {
        name: "slope_continuous_at_t_c".into(),
        pass: jump < JUMP_TOL,
        detail: format!("epsilon_dot jump {jump:.3e}"),
        offending_t: (jump >= JUMP_TOL).then_some(tc),
    });

    Ok(TbgReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::rk4_step;

    #[test]
    fn eval_examples() {
        let g = TbgPoly::new(6.0).unwrap();
        assert_eq!(g.tbg_eval(0.0).unwrap(), (0.0, 0.0));
        let (e, ed) = g.tbg_eval(6.0).unwrap();
        assert!((e - 1.0).abs() < 1e-15 && ed.abs() < 1e-15);
        // 10/64 - 24/32 + 15/16
        let (e, ed) = g.tbg_eval(3.0).unwrap();
        assert!((e - 0.34375).abs() < 1e-15);
        assert!((ed - 0.3125).abs() < 1e-15);
        assert_eq!(g.tbg_eval(100.0).unwrap(), (1.0, 0.0));
        assert!(matches!(g.tbg_eval(-1.0), Err(Error::NegativeTime(_))));
        assert!(TbgPoly::new(0.0).is_err());
    }

    #[test]
    fn gain_examples() {
        let g = TbgPoly::new(6.0).unwrap();
        assert_eq!(g.gain(0.0, 0.1).unwrap(), 0.0);
        assert_eq!(g.gain(7.0, 0.1).unwrap(), 0.0);
        // 0.3125 / (1 - 0.34375 + 0.1), hand-evaluated
        let expected = 0.3125 / 0.75625;
        assert!((g.gain(3.0, 0.1).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.413_223_140_495_867_8).abs() < 1e-15);
        assert!(g.gain(1.0, 0.0).is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let g = TbgPoly::new(2.5).unwrap();
        let h = 1e-6;
        for k in 1..50 {
            let t = 2.5 * k as f64 / 50.0;
            let fd = (g.eval(t + h).0 - g.eval(t - h).0) / (2.0 * h);
            assert!((fd - g.eval(t).1).abs() < 1e-7);
        }
    }

    #[test]
    fn validate_passes_for_polynomial() {
        for tc in [1.0, 6.0, 100.0] {
            let r = tbg_validate(&TbgPoly::new(tc).unwrap(), 1000).unwrap();
            assert!(r.all_pass(), "{r:?}");
        }
    }

    #[test]
    fn validate_flags_rippled_profile() {
        let bad = RippledTbg {
            base: TbgPoly::new(6.0).unwrap(),
            amplitude: 0.05,
        };
        let r = tbg_validate(&bad, 1000).unwrap();
        let mono = r.check("non_decreasing").unwrap();
        assert!(!mono.pass);
        let t = mono.offending_t.unwrap();
        assert!(t > 0.0 && t < 6.0);
        assert!(tbg_validate(&bad, 10).is_err());
    }

    #[test]
    fn slope_has_single_interior_maximum() {
        let g = TbgPoly::new(6.0).unwrap();
        let n = 10_000;
        let d: Vec<f64> = (0..=n).map(|k| g.eval(6.0 * k as f64 / n as f64).1).collect();
        assert!(d.iter().all(|&v| v >= 0.0));
        let maxima = d
            .windows(3)
            .filter(|w| w[1] > w[0] && w[1] >= w[2])
            .count();
        assert_eq!(maxima, 1);
    }

    #[test]
    fn gain_flow_reaches_closed_form_at_t_c() {
        let g = TbgPoly::new(6.0).unwrap();
        let dt = 1e-4;
        let steps = (6.0_f64 / dt).round() as usize;
        for &eps in &[0.1, 0.01] {
            for &x0 in &[1.0, -50.0, 1e3] {
                let mut x = vec![x0];
                for k in 0..steps {
                    let t = k as f64 * dt;
                    x = rk4_step(|t, y| vec![-g.gain(t, eps).unwrap() * y[0]], t, &x, dt);
                }
                let expected = x0 * eps / (1.0 + eps);
                assert!(
                    ((x[0] - expected) / expected).abs() < 1e-3,
                    "eps={eps} x0={x0} got {} want {expected}",
                    x[0]
                );
            }
        }
    }
}
