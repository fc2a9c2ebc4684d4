//! Sliding surfaces: the conventional finite-time and fixed-time terminal
//! surfaces and the predefined-time (PTSM) surface, with their on-surface
//! reduced flows and settling-time bounds.
//!
//! Every surface has the form `s = ẋ + drift(x)`, applied componentwise.
//! On the surface the state follows `ẋ = -drift(x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::rk4_step;
use crate::vecops::{abs_pow, norm_inf, sig_pow_scalar, RealVec};

/// States closer to the origin than this are snapped to it during flow
/// integration.
pub const SNAP_RADIUS: f64 = 1e-9;

/// Substep size is chosen so that `h * stiffness(x)` stays below this.
const SUBSTEP_GAIN: f64 = 0.1;

/// Parameters of the predefined-time surface
/// `s = ẋ + (1+x²)^{3/2} / (T_s (1-γ)) · sig(x / √(1+x²))^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ptsm {
    pub t_s: f64,
    pub gamma: f64,
}

impl Ptsm {
    pub fn new(t_s: f64, gamma: f64) -> Result<Self> {
        let p = Self { t_s, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_s > 0.0 && self.t_s.is_finite()) {
            return Err(Error::invalid(format!("T_s must be positive, got {}", self.t_s)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// `1 / (T_s (1 - γ))`
    #[inline]
    pub fn coeff(&self) -> f64 {
        1.0 / (self.t_s * (1.0 - self.gamma))
    }

    /// Nonlinear part of the surface for one component.
    #[inline]
    pub fn drift(&self, x: f64) -> f64 {
        let w = 1.0 + x * x;
        let u = x / w.sqrt();
        self.coeff() * w * w.sqrt() * sig_pow_scalar(u, self.gamma)
    }

    /// Time derivative of [`Ptsm::drift`] along `(x, ẋ)`:
    /// `c·[3x√(1+x²)·ẋ·sig(u)^γ + γ·ẋ·|u|^{γ-1}]` with `u = x/√(1+x²)`.
    ///
    /// The factor `|u|^{γ-1}` diverges at `x = 0`; when `base_floor` is set,
    /// `|u|` is clamped below at that value before exponentiation.
    #[inline]
    pub fn drift_rate(&self, x: f64, xdot: f64, base_floor: Option<f64>) -> f64 {
        let w = 1.0 + x * x;
        let root = w.sqrt();
        let u = x / root;
        let mut base = u.abs();
        if let Some(floor) = base_floor {
            base = base.max(floor);
        }
        let singular = if base == 0.0 {
            if xdot == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.gamma * xdot * base.powf(self.gamma - 1.0)
        };
        self.coeff() * (3.0 * x * root * xdot * sig_pow_scalar(u, self.gamma) + singular)
    }

    /// Lyapunov function of the reduced flow, `(|x|/√(1+x²))^{1-γ}`.
    pub fn lyapunov(&self, x: f64) -> f64 {
        ptsm_lyapunov(x, self.gamma)
    }
}

/// `ln(|x| / √(1+x²))`, accurate for large `|x|`.
fn ln_unit_ratio(x: f64) -> f64 {
    let a = x.abs();
    if a >= 1.0 {
        -0.5 * (1.0 / (a * a)).ln_1p()
    } else {
        a.ln() - 0.5 * (a * a).ln_1p()
    }
}

/// `(|x| / √(1+x²))^{1-γ}`.
///
/// Mathematically strictly below one; in `f64` it rounds to `1.0` once
/// `|x|` exceeds roughly `1e8`. Use [`ptsm_lyapunov_gap`] when the distance
/// to one matters.
pub fn ptsm_lyapunov(x: f64, gamma: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    ((1.0 - gamma) * ln_unit_ratio(x)).exp()
}

/// `1 - ptsm_lyapunov(x, γ)`, computed without cancellation. Positive for
/// every finite `x` up to `|x| ≈ 1e154`.
pub fn ptsm_lyapunov_gap(x: f64, gamma: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    -((1.0 - gamma) * ln_unit_ratio(x)).exp_m1()
}

fn check_odd(name: &str, v: u32) -> Result<()> {
    if v == 0 || v.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "{name} must be a positive odd integer, got {v}"
        )));
    }
    Ok(())
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Validate the exponent pairs of a fixed-time law: odd, `m1 > n1`, `m2 < n2`.
pub fn check_fixed_time_exponents(m1: u32, n1: u32, m2: u32, n2: u32) -> Result<()> {
    check_odd("m1", m1)?;
    check_odd("n1", n1)?;
    check_odd("m2", m2)?;
    check_odd("n2", n2)?;
    if m1 <= n1 {
        return Err(Error::invalid(format!("need m1 > n1, got {m1} <= {n1}")));
    }
    if m2 >= n2 {
        return Err(Error::invalid(format!("need m2 < n2, got {m2} >= {n2}")));
    }
    Ok(())
}

/// The sliding surface families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceConfig {
    /// `s = ẋ + b1 sig(x)^ν`
    FiniteBasic { b1: f64, nu: f64 },
    /// `s = ẋ + a1 x + b1 sig(x)^ν`
    FiniteFast { a1: f64, b1: f64, nu: f64 },
    /// `s = ẋ + a2 x^{m1/n1} + b2 x^{m2/n2}` with odd-ratio exponents
    FixedTime {
        a2: f64,
        b2: f64,
        m1: u32,
        n1: u32,
        m2: u32,
        n2: u32,
    },
    Ptsm(Ptsm),
}

impl SurfaceConfig {
    pub fn finite_basic(b1: f64, nu: f64) -> Result<Self> {
        let c = SurfaceConfig::FiniteBasic { b1, nu };
        c.validate()?;
        Ok(c)
    }

    pub fn finite_fast(a1: f64, b1: f64, nu: f64) -> Result<Self> {
        let c = SurfaceConfig::FiniteFast { a1, b1, nu };
        c.validate()?;
        Ok(c)
    }

    pub fn fixed_time(a2: f64, b2: f64, m1: u32, n1: u32, m2: u32, n2: u32) -> Result<Self> {
        let c = SurfaceConfig::FixedTime {
            a2,
            b2,
            m1,
            n1,
            m2,
            n2,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn ptsm(t_s: f64, gamma: f64) -> Result<Self> {
        Ok(SurfaceConfig::Ptsm(Ptsm::new(t_s, gamma)?))
    }

    pub fn validate(&self) -> Result<()> {
        let check_nu = |nu: f64| {
            if nu > 0.0 && nu < 1.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("nu must lie in (0, 1), got {nu}")))
            }
        };
        match *self {
            SurfaceConfig::FiniteBasic { b1, nu } => {
                check_positive("b1", b1)?;
                check_nu(nu)
            }
            SurfaceConfig::FiniteFast { a1, b1, nu } => {
                check_positive("a1", a1)?;
                check_positive("b1", b1)?;
                check_nu(nu)
            }
            SurfaceConfig::FixedTime {
                a2,
                b2,
                m1,
                n1,
                m2,
                n2,
            } => {
                check_positive("a2", a2)?;
                check_positive("b2", b2)?;
                check_fixed_time_exponents(m1, n1, m2, n2)
            }
            SurfaceConfig::Ptsm(p) => p.validate(),
        }
    }

    /// Nonlinear part `drift(x)` of `s = ẋ + drift(x)` for one component.
    pub fn drift(&self, x: f64) -> f64 {
        match *self {
            SurfaceConfig::FiniteBasic { b1, nu } => b1 * sig_pow_scalar(x, nu),
            SurfaceConfig::FiniteFast { a1, b1, nu } => a1 * x + b1 * sig_pow_scalar(x, nu),
            SurfaceConfig::FixedTime {
                a2,
                b2,
                m1,
                n1,
                m2,
                n2,
            } => {
                a2 * sig_pow_scalar(x, m1 as f64 / n1 as f64)
                    + b2 * sig_pow_scalar(x, m2 as f64 / n2 as f64)
            }
            SurfaceConfig::Ptsm(p) => p.drift(x),
        }
    }

    /// Local stiffness estimate of the reduced flow, ignoring the
    /// non-Lipschitz part at the origin.
    fn stiffness(&self, x: f64) -> f64 {
        match *self {
            SurfaceConfig::FiniteBasic { .. } => 0.0,
            SurfaceConfig::FiniteFast { a1, .. } => a1,
            SurfaceConfig::FixedTime { a2, m1, n1, .. } => {
                let k = m1 as f64 / n1 as f64;
                a2 * k * abs_pow(x, k - 1.0)
            }
            SurfaceConfig::Ptsm(p) => 3.0 * p.coeff() * (1.0 + x * x),
        }
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// Sliding variable `s = ẋ + drift(x)`, componentwise.
pub fn surface_value(cfg: &SurfaceConfig, x: &[f64], xdot: &[f64]) -> Result<RealVec> {
    check_dims(x, xdot)?;
    RealVec::new(
        x.iter()
            .zip(xdot)
            .map(|(&xi, &vi)| vi + cfg.drift(xi))
            .collect(),
    )
}

/// Reduced flow on `s = 0`: `ẋ = -drift(x)`.
pub fn on_surface_rhs(cfg: &SurfaceConfig, x: &[f64]) -> Result<RealVec> {
    RealVec::new(x.iter().map(|&xi| -cfg.drift(xi)).collect())
}

/// Upper bound on the time the reduced flow needs to reach the origin from
/// `x0`. Vector states use the largest-magnitude component.
pub fn settling_bound(cfg: &SurfaceConfig, x0: &[f64]) -> f64 {
    let x = norm_inf(x0);
    match *cfg {
        SurfaceConfig::FiniteBasic { b1, nu } => abs_pow(x, 1.0 - nu) / (b1 * (1.0 - nu)),
        SurfaceConfig::FiniteFast { a1, b1, nu } => {
            ((a1 * abs_pow(x, 1.0 - nu) + b1) / b1).ln() / (a1 * (1.0 - nu))
        }
        SurfaceConfig::FixedTime {
            a2,
            b2,
            m1,
            n1,
            m2,
            n2,
        } => {
            n1 as f64 / (a2 * (m1 - n1) as f64) + n2 as f64 / (b2 * (n2 - m2) as f64)
        }
        SurfaceConfig::Ptsm(p) => p.lyapunov(x) * p.t_s,
    }
}

/// `T_s - settling_bound` for the PTSM surface, computed without
/// cancellation. Always positive.
pub fn ptsm_settling_margin(p: &Ptsm, x0: &[f64]) -> f64 {
    p.t_s * ptsm_lyapunov_gap(norm_inf(x0), p.gamma)
}

/// Sampled trajectory of the reduced flow.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceFlow {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
}

impl SurfaceFlow {
    /// Component `i` over time.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.x.iter().map(|x| x[i]).collect()
    }
}

/// Advance one scalar component of the reduced flow over `dt`.
///
/// The RK4 step is subdivided where the flow is stiff; a step that lands
/// within [`SNAP_RADIUS`] of the origin or crosses it ends at the origin.
pub fn advance_on_surface(cfg: &SurfaceConfig, x: f64, dt: f64) -> f64 {
    let rhs = |_: f64, y: &[f64]| vec![-cfg.drift(y[0])];
    let mut x = x;
    let mut remaining = dt;
    while x != 0.0 {
        let stiff = cfg.stiffness(x);
        let h_max = if stiff > 0.0 {
            SUBSTEP_GAIN / stiff
        } else {
            f64::INFINITY
        };
        let last = h_max >= remaining * (1.0 - 1e-9);
        let h = if last { remaining } else { h_max };
        let next = rk4_step(rhs, 0.0, &[x], h)[0];
        x = if next.abs() < SNAP_RADIUS || next.signum() != x.signum() {
            0.0
        } else {
            next
        };
        if last {
            break;
        }
        remaining -= h;
    }
    x
}

/// Integrate the reduced flow from `x0` over `[0, horizon]` on a grid of
/// spacing `dt`, componentwise.
pub fn integrate_on_surface(
    cfg: &SurfaceConfig,
    x0: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<SurfaceFlow> {
    cfg.validate()?;
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(Error::invalid("dt and horizon must be positive"));
    }
    let x0 = RealVec::try_from(x0)?;
    let steps = (horizon / dt).round() as usize;
    let mut t = Vec::with_capacity(steps + 1);
    let mut xs = Vec::with_capacity(steps + 1);
    let mut x = x0.into_inner();
    t.push(0.0);
    xs.push(x.clone());
    for k in 1..=steps {
        for xi in x.iter_mut() {
            *xi = advance_on_surface(cfg, *xi, dt);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { t: k as f64 * dt });
        }
        t.push(k as f64 * dt);
        xs.push(x.clone());
    }
    Ok(SurfaceFlow { t, x: xs })
}
