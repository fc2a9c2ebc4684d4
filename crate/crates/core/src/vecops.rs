//! Elementwise vector operators: `sig(x)^k`, Hadamard product, `[[x]]^k`
//! and the regularized sign used by every hitting law.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A vector of finite reals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RealVec(Vec<f64>);

impl RealVec {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().all(|v| v.is_finite()) {
            Ok(Self(entries))
        } else {
            Err(Error::NonFinite("RealVec entries"))
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for RealVec {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for RealVec {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl TryFrom<&[f64]> for RealVec {
    type Error = Error;

    fn try_from(v: &[f64]) -> Result<Self> {
        Self::new(v.to_vec())
    }
}

/// How `sgn(s)` is evaluated inside the hitting laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SgnMode {
    /// Entrywise sign with `sgn(0) = 0`.
    Exact,
    /// `sat(s / width)`: linear inside `|s| < width`, saturated outside.
    BoundaryLayer { width: f64 },
}

impl Default for SgnMode {
    fn default() -> Self {
        SgnMode::BoundaryLayer { width: 1e-3 }
    }
}

/// `|x|^k`, with zero mapped to zero directly so `ln(0)` never occurs.
#[inline]
pub fn abs_pow(x: f64, k: f64) -> f64 {
    let a = x.abs();
    if a == 0.0 {
        0.0
    } else {
        a.powf(k)
    }
}

/// Scalar `sgn(x)|x|^k`.
#[inline]
pub fn sig_pow_scalar(x: f64, k: f64) -> f64 {
    sign(x) * abs_pow(x, k)
}

/// Sign with `sgn(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_finite(x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("input vector"))
    }
}

fn finish(out: Vec<f64>) -> Result<RealVec> {
    RealVec::new(out)
}

/// `sig(x)^k = [sgn(x_i)|x_i|^k]`.
pub fn sig_pow(x: &[f64], k: f64) -> Result<RealVec> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::NonPositiveExponent(k));
    }
    check_finite(x)?;
    finish(x.iter().map(|&v| sig_pow_scalar(v, k)).collect())
}

/// Entrywise product `x ∘ y`.
pub fn hadamard(x: &[f64], y: &[f64]) -> Result<RealVec> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    check_finite(x)?;
    check_finite(y)?;
    finish(x.iter().zip(y).map(|(a, b)| a * b).collect())
}

/// `[[x]]^k = [x_i^k]`. Non-integer exponents need strictly positive entries.
pub fn elem_pow(x: &[f64], k: f64) -> Result<RealVec> {
    check_finite(x)?;
    if !k.is_finite() {
        return Err(Error::NonFinite("exponent"));
    }
    let integer = k.fract() == 0.0;
    if !integer {
        if let Some(&bad) = x.iter().find(|&&v| v <= 0.0) {
            return Err(Error::NonPositiveBase {
                exponent: k,
                value: bad,
            });
        }
    }
    let out = x
        .iter()
        .map(|&v| if integer { v.powi(k as i32) } else { v.powf(k) })
        .collect();
    finish(out)
}

/// Scalar regularized sign.
#[inline]
pub fn sgn_reg_scalar(s: f64, mode: SgnMode) -> f64 {
    match mode {
        SgnMode::Exact => sign(s),
        SgnMode::BoundaryLayer { width } => (s / width).clamp(-1.0, 1.0),
    }
}

/// Entrywise `sgn(s)` (exact) or `sat(s / width)` (boundary layer).
pub fn sgn_reg(s: &[f64], mode: SgnMode) -> Result<RealVec> {
    if let SgnMode::BoundaryLayer { width } = mode {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::invalid(format!(
                "boundary layer width must be positive, got {width}"
            )));
        }
    }
    check_finite(s)?;
    finish(s.iter().map(|&v| sgn_reg_scalar(v, mode)).collect())
}

/// Euclidean norm.
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Max-norm.
pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sig_pow_examples() {
        assert_eq!(sig_pow(&[-4.0, 9.0], 0.5).unwrap().as_slice(), &[-2.0, 3.0]);
        assert_eq!(sig_pow(&[0.0, 0.0], 0.3).unwrap().as_slice(), &[0.0, 0.0]);
        let id = sig_pow(&[2.0, -3.0], 1.0).unwrap();
        assert!((id[0] - 2.0).abs() < 1e-15 && (id[1] + 3.0).abs() < 1e-15);
    }

    #[test]
    fn sig_pow_rejects_bad_input() {
        assert!(matches!(
            sig_pow(&[1.0], 0.0),
            Err(Error::NonPositiveExponent(_))
        ));
        assert!(sig_pow(&[1.0], -1.0).is_err());
        assert!(matches!(
            sig_pow(&[f64::NAN], 0.5),
            Err(Error::NonFinite(_))
        ));
        assert!(sig_pow(&[f64::INFINITY], 0.5).is_err());
    }

    #[test]
    fn hadamard_examples() {
        assert_eq!(hadamard(&[1.0, 2.0], &[3.0, 4.0]).unwrap().as_slice(), &[3.0, 8.0]);
        let x = [1.5, -2.0, 7.0];
        assert_eq!(hadamard(&x, &RealVec::ones(3)).unwrap().as_slice(), &x);
        assert_eq!(hadamard(&[0.0, 5.0], &[7.0, 0.0]).unwrap().as_slice(), &[0.0, 0.0]);
        assert!(matches!(
            hadamard(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn elem_pow_examples() {
        assert_eq!(elem_pow(&[1.0, 3.0], 2.0).unwrap().as_slice(), &[1.0, 9.0]);
        let r = elem_pow(&[4.0, 9.0], -0.5).unwrap();
        assert!((r[0] - 0.5).abs() < 1e-15);
        assert!((r[1] - 1.0 / 3.0).abs() < 1e-15);
        let x = [-2.0, 0.0, 3.5];
        assert_eq!(elem_pow(&x, 1.0).unwrap().as_slice(), &x);
        assert!(matches!(
            elem_pow(&[1.0, -1.0], 0.5),
            Err(Error::NonPositiveBase { .. })
        ));
        assert!(elem_pow(&[0.0], 1.5).is_err());
    }

    #[test]
    fn sgn_reg_examples() {
        assert_eq!(
            sgn_reg(&[-0.2, 0.0, 3.0], SgnMode::Exact).unwrap().as_slice(),
            &[-1.0, 0.0, 1.0]
        );
        let layer = SgnMode::BoundaryLayer { width: 1e-3 };
        assert!((sgn_reg(&[5e-4], layer).unwrap()[0] - 0.5).abs() < 1e-12);
        assert_eq!(sgn_reg(&[-2.0], layer).unwrap()[0], -1.0);
        assert!(sgn_reg(&[1.0], SgnMode::BoundaryLayer { width: 0.0 }).is_err());
    }

    #[test]
    fn real_vec_rejects_non_finite() {
        assert!(RealVec::new(vec![1.0, f64::NAN]).is_err());
        assert!(RealVec::try_from(vec![1.0, 2.0]).is_ok());
    }

    fn finite() -> impl Strategy<Value = f64> {
        -1e6..1e6f64
    }

    proptest! {
        #[test]
        fn sig_pow_is_odd(x in prop::collection::vec(finite(), 1..8), k in 0.01..4.0f64) {
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let a = sig_pow(&x, k).unwrap();
            let b = sig_pow(&neg, k).unwrap();
            for (p, q) in a.iter().zip(b.iter()) {
                prop_assert_eq!(*p, -*q);
            }
        }

        #[test]
        fn odd_ratio_matches_signed_elem_pow(
            x in prop::collection::vec(finite(), 1..8),
            m in 0usize..4,
            n in 0usize..4,
        ) {
            let (m, n) = ((2 * m + 1) as f64, (2 * n + 1) as f64);
            let k = m / n;
            let a = sig_pow(&x, k).unwrap();
            let abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
            for (i, v) in x.iter().enumerate() {
                if *v == 0.0 {
                    prop_assert_eq!(a[i], 0.0);
                    continue;
                }
                let e = elem_pow(&abs[i..=i], k).unwrap()[0] * v.signum();
                prop_assert!((a[i] - e).abs() <= 1e-12 * e.abs().max(1.0));
            }
        }

        #[test]
        fn boundary_layer_matches_exact_outside(
            s in prop::collection::vec(finite(), 1..8),
            width in 1e-6..10.0f64,
        ) {
            let exact = sgn_reg(&s, SgnMode::Exact).unwrap();
            let layer = sgn_reg(&s, SgnMode::BoundaryLayer { width }).unwrap();
            for i in 0..s.len() {
                if s[i].abs() >= width {
                    prop_assert_eq!(exact[i], layer[i]);
                }
            }
        }

        #[test]
        fn hadamard_commutative_associative(
            v in prop::collection::vec((finite(), finite(), finite()), 1..8),
        ) {
            let x: Vec<f64> = v.iter().map(|t| t.0).collect();
            let y: Vec<f64> = v.iter().map(|t| t.1).collect();
            let z: Vec<f64> = v.iter().map(|t| t.2).collect();
            prop_assert_eq!(hadamard(&x, &y).unwrap(), hadamard(&y, &x).unwrap());
            let l = hadamard(&hadamard(&x, &y).unwrap(), &z).unwrap();
            let r = hadamard(&x, &hadamard(&y, &z).unwrap()).unwrap();
            for (a, b) in l.iter().zip(r.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE));
            }
        }
    }
}
