//! Plant models: the uncertain second-order chain, the Euler-Lagrange
//! manipulator (with a two-link preset), reference trajectories and
//! bounded random disturbances.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gravitational acceleration used by the manipulator presets, m/s².
pub const GRAVITY: f64 = 9.8;

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Second-order chain

#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderState {
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
}

impl SecondOrderState {
    pub fn new(xi: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        check_len(xi.len(), eta.len())?;
        if xi.iter().chain(&eta).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("second-order state"));
        }
        Ok(Self { xi, eta })
    }
}

/// `ξ̇ = η`, `η̇ = τ + f`.
pub fn second_order_rhs(
    s: &SecondOrderState,
    tau: &[f64],
    f: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = s.xi.len();
    check_len(n, s.eta.len())?;
    check_len(n, tau.len())?;
    check_len(n, f.len())?;
    let eta_dot = tau.iter().zip(f).map(|(a, b)| a + b).collect();
    Ok((s.eta.clone(), eta_dot))
}

// ---------------------------------------------------------------------------
// Euler-Lagrange models

/// `M(q)`, `C(q, q̇)` and `g(q)` at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Dynamics {
    pub mass: DMatrix<f64>,
    pub coriolis: DMatrix<f64>,
    pub gravity: DVector<f64>,
}

/// Any rigid-body model of the form `M(q)q̈ + C(q,q̇)q̇ + g(q) = τ + d`.
pub trait EulerLagrange: Send + Sync {
    fn dof(&self) -> usize;

    fn dynamics(&self, q: &[f64], qdot: &[f64]) -> Result<Dynamics>;
}

/// Physical parameters of the planar two-link arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipulatorParams {
    /// link masses, kg
    pub m: [f64; 2],
    /// link lengths, m
    pub l: [f64; 2],
    /// centre-of-mass distances, m
    pub r: [f64; 2],
    pub g_const: f64,
}

impl ManipulatorParams {
    pub fn new(m: [f64; 2], l: [f64; 2], r: [f64; 2], g_const: f64) -> Result<Self> {
        if m.iter().chain(&l).chain(&r).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("masses and lengths must be positive"));
        }
        if !g_const.is_finite() {
            return Err(Error::NonFinite("gravity constant"));
        }
        Ok(Self { m, l, r, g_const })
    }

    /// Centre of mass at mid-link.
    pub fn uniform_links(m: [f64; 2], l: [f64; 2]) -> Result<Self> {
        Self::new(m, l, [l[0] / 2.0, l[1] / 2.0], GRAVITY)
    }

    /// The simulated ("true") arm.
    pub fn true_preset() -> Self {
        Self::uniform_links([2.8, 1.8], [3.8, 2.8]).expect("valid preset")
    }

    /// The controller's estimate of the arm.
    pub fn nominal_preset() -> Self {
        Self::uniform_links([2.75, 1.85], [3.86, 2.74]).expect("valid preset")
    }

    /// Link inertias `I_i = m_i l_i² / 3`.
    pub fn inertias(&self) -> [f64; 2] {
        [
            self.m[0] * self.l[0] * self.l[0] / 3.0,
            self.m[1] * self.l[1] * self.l[1] / 3.0,
        ]
    }

    /// Lumped coefficients `p1..p5`.
    pub fn coefficients(&self) -> [f64; 5] {
        let [m1, m2] = self.m;
        let [l1, _] = self.l;
        let [r1, r2] = self.r;
        let [i1, i2] = self.inertias();
        [
            m1 * r1 * r1 + m2 * (l1 * l1 + r2 * r2) + i1 + i2,
            m2 * l1 * r2,
            m2 * r2 * r2 + i2,
            m1 * r1 + m2 * l1,
            m2 * r2,
        ]
    }

    /// Inertia, Coriolis and gravity terms at `(q, q̇)`.
    pub fn manip_matrices(&self, q: &[f64], qdot: &[f64]) -> Result<Dynamics> {
        check_len(2, q.len())?;
        check_len(2, qdot.len())?;
        let [p1, p2, p3, p4, p5] = self.coefficients();
        let (c2, s2) = (q[1].cos(), q[1].sin());
        let m12 = p3 + p2 * c2;
        let mass = DMatrix::from_row_slice(2, 2, &[p1 + 2.0 * p2 * c2, m12, m12, p3]);
        let coriolis = DMatrix::from_row_slice(
            2,
            2,
            &[
                -p2 * s2 * qdot[1],
                -p2 * s2 * (qdot[0] + qdot[1]),
                p2 * s2 * qdot[0],
                0.0,
            ],
        );
        let g12 = self.g_const * p5 * (q[0] + q[1]).cos();
        let gravity = DVector::from_vec(vec![self.g_const * p4 * q[0].cos() + g12, g12]);
        Ok(Dynamics {
            mass,
            coriolis,
            gravity,
        })
    }

    /// `Ṁ = (∂M/∂q2)·q̇2`, analytic.
    pub fn mass_matrix_dot(&self, q: &[f64], qdot: &[f64]) -> Result<DMatrix<f64>> {
        check_len(2, q.len())?;
        check_len(2, qdot.len())?;
        let p2 = self.coefficients()[1];
        let d = -p2 * q[1].sin() * qdot[1];
        Ok(DMatrix::from_row_slice(2, 2, &[2.0 * d, d, d, 0.0]))
    }
}

impl EulerLagrange for ManipulatorParams {
    fn dof(&self) -> usize {
        2
    }

    fn dynamics(&self, q: &[f64], qdot: &[f64]) -> Result<Dynamics> {
        self.manip_matrices(q, qdot)
    }
}

/// Solve `M x = b` for symmetric positive-definite `M`, falling back to LU.
pub(crate) fn solve_mass(mass: &DMatrix<f64>, b: DVector<f64>, q: &[f64]) -> Result<DVector<f64>> {
    if let Some(chol) = mass.clone().cholesky() {
        return Ok(chol.solve(&b));
    }
    mass.clone()
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::SingularMass(q.to_vec()))
}

/// `q̈ = M(q)⁻¹ (τ + d − C(q,q̇) q̇ − g(q))`.
pub fn manip_rhs<E: EulerLagrange + ?Sized>(
    model: &E,
    q: &[f64],
    qdot: &[f64],
    tau: &[f64],
    d: &[f64],
) -> Result<Vec<f64>> {
    let n = model.dof();
    check_len(n, q.len())?;
    check_len(n, qdot.len())?;
    check_len(n, tau.len())?;
    check_len(n, d.len())?;
    let dy = model.dynamics(q, qdot)?;
    let qd = DVector::from_column_slice(qdot);
    let rhs = DVector::from_column_slice(tau) + DVector::from_column_slice(d)
        - &dy.coriolis * qd
        - &dy.gravity;
    Ok(solve_mass(&dy.mass, rhs, q)?.as_slice().to_vec())
}

/// Lumped model uncertainty `h = −ΔM q̈ − ΔC q̇ − Δg`, with `Δ = true − nominal`.
pub fn uncertainty<T, N>(truth: &T, nominal: &N, q: &[f64], qdot: &[f64], qddot: &[f64]) -> Result<Vec<f64>>
where
    T: EulerLagrange + ?Sized,
    N: EulerLagrange + ?Sized,
{
    let t = truth.dynamics(q, qdot)?;
    let n = nominal.dynamics(q, qdot)?;
    let qdd = DVector::from_column_slice(qddot);
    let qd = DVector::from_column_slice(qdot);
    let h = -(&t.mass - &n.mass) * qdd - (&t.coriolis - &n.coriolis) * qd - (&t.gravity - &n.gravity);
    Ok(h.as_slice().to_vec())
}

/// Empirical Property-2 constants on a sampled set of states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixBoundsFit {
    /// max ‖M(q)‖₂
    pub sigma_m: f64,
    /// max ‖C(q,q̇)‖₂ / ‖q̇‖
    pub sigma_c: f64,
    /// max ‖g(q)‖
    pub sigma_g1: f64,
    /// smallest eigenvalue of M seen
    pub lambda_min: f64,
}

/// Fit the bounds `‖M‖ ≤ σ̄_m`, `‖C‖ ≤ σ̄_c‖q̇‖`, `‖g‖ ≤ σ̄_g1` over a
/// `grid × grid` lattice of `q ∈ [−π, π]²`. `C` is linear in `q̇`, so the
/// ratio is swept over unit velocity directions only.
pub fn fit_matrix_bounds<E: EulerLagrange + ?Sized>(model: &E, grid: usize) -> Result<MatrixBoundsFit> {
    if model.dof() != 2 || grid < 2 {
        return Err(Error::invalid("property fit needs a 2-DOF model and grid >= 2"));
    }
    let mut fit = MatrixBoundsFit {
        sigma_m: 0.0,
        sigma_c: 0.0,
        sigma_g1: 0.0,
        lambda_min: f64::INFINITY,
    };
    let pi = std::f64::consts::PI;
    const DIRECTIONS: usize = 360;
    for i in 0..grid {
        for j in 0..grid {
            let q = [
                -pi + 2.0 * pi * i as f64 / (grid - 1) as f64,
                -pi + 2.0 * pi * j as f64 / (grid - 1) as f64,
            ];
            let dy = model.dynamics(&q, &[0.0, 0.0])?;
            let eig = dy.mass.clone().symmetric_eigen().eigenvalues;
            fit.sigma_m = fit.sigma_m.max(eig.max());
            fit.lambda_min = fit.lambda_min.min(eig.min());
            fit.sigma_g1 = fit.sigma_g1.max(dy.gravity.norm());
            for k in 0..DIRECTIONS {
                let (s, c) = (pi * k as f64 / DIRECTIONS as f64).sin_cos();
                let cor = model.dynamics(&q, &[c, s])?.coriolis;
                fit.sigma_c = fit.sigma_c.max(cor.svd(false, false).singular_values.max());
            }
        }
    }
    Ok(fit)
}

// ---------------------------------------------------------------------------
// Reference trajectories

/// Desired position, velocity and acceleration at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct RefSample {
    pub q: Vec<f64>,
    pub w: Vec<f64>,
    pub a: Vec<f64>,
}

pub trait ReferenceTrajectory: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, t: f64) -> RefSample;
}

/// Regulation to the origin.
#[derive(Debug, Clone, Copy)]
pub struct ZeroReference {
    pub dim: usize,
}

impl ReferenceTrajectory for ZeroReference {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, _t: f64) -> RefSample {
        RefSample {
            q: vec![0.0; self.dim],
            w: vec![0.0; self.dim],
            a: vec![0.0; self.dim],
        }
    }
}

/// `q_r = [7 + 5 sin t, −7 − 5 cos t]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CircleReference;

impl CircleReference {
    /// `‖α_r(t)‖₂` is identically 5.
    pub const ACCEL_BOUND: f64 = 5.0;
}

impl ReferenceTrajectory for CircleReference {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, t: f64) -> RefSample {
        let (s, c) = t.sin_cos();
        RefSample {
            q: vec![7.0 + 5.0 * s, -7.0 - 5.0 * c],
            w: vec![5.0 * c, 5.0 * s],
            a: vec![-5.0 * s, 5.0 * c],
        }
    }
}

/// Convenience wrapper for [`CircleReference::eval`].
pub fn reference_eval(t: f64) -> RefSample {
    CircleReference.eval(t)
}

// ---------------------------------------------------------------------------
// Disturbances

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    Zero,
    /// Each component uniform on `[−bound, bound]`, redrawn every step.
    PiecewiseConstantUniform,
}

/// Bounded random disturbance, deterministic in `(seed, step index)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceModel {
    pub kind: DisturbanceKind,
    pub bound: f64,
    pub seed: u64,
    pub dim: usize,
}

/// Keeps disturbance streams apart from initial-condition streams drawn
/// from the same run seed.
const DISTURBANCE_SALT: u64 = 0x5eed_d157_0b0e_0001;

impl DisturbanceModel {
    pub fn new(kind: DisturbanceKind, bound: f64, seed: u64, dim: usize) -> Result<Self> {
        if !(bound >= 0.0 && bound.is_finite()) {
            return Err(Error::invalid(format!("disturbance bound must be >= 0, got {bound}")));
        }
        Ok(Self {
            kind,
            bound,
            seed,
            dim,
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            kind: DisturbanceKind::Zero,
            bound: 0.0,
            seed: 0,
            dim,
        }
    }

    /// Disturbance held over integration step `step`.
    pub fn sample_step(&self, step: u64) -> Vec<f64> {
        match self.kind {
            DisturbanceKind::Zero => vec![0.0; self.dim],
            DisturbanceKind::PiecewiseConstantUniform => {
                if self.bound == 0.0 {
                    return vec![0.0; self.dim];
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ DISTURBANCE_SALT);
                rng.set_stream(step);
                (0..self.dim)
                    .map(|_| rng.gen_range(-self.bound..=self.bound))
                    .collect()
            }
        }
    }
}

/// Disturbance active at time `t` for an integrator stepping by `dt`.
pub fn disturbance_sample(dm: &DisturbanceModel, t: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let step = (t / dt + 1e-9).floor().max(0.0) as u64;
    Ok(dm.sample_step(step))
}

// ---------------------------------------------------------------------------
// Presets

/// Named plant presets.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    /// Two-dimensional double integrator with a uniform disturbance bounded by 5.
    SecondOrder { dim: usize, disturbance_bound: f64 },
    Manipulator(ManipulatorParams),
}

pub const PRESET_NAMES: [&str; 3] = ["example1", "manip2dof-true", "manip2dof-nominal"];

pub fn preset(name: &str) -> Result<Preset> {
    match name {
        "example1" => Ok(Preset::SecondOrder {
            dim: 2,
            disturbance_bound: 5.0,
        }),
        "manip2dof-true" => Ok(Preset::Manipulator(ManipulatorParams::true_preset())),
        "manip2dof-nominal" => Ok(Preset::Manipulator(ManipulatorParams::nominal_preset())),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

pub fn manipulator_preset(name: &str) -> Result<ManipulatorParams> {
    match preset(name)? {
        Preset::Manipulator(p) => Ok(p),
        Preset::SecondOrder { .. } => Err(Error::invalid(format!(
            "`{name}` is not a manipulator preset"
        ))),
    }
}
