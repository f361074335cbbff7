//! Quaternion arithmetic and the commutativity measures built on it.
//!
//! Multiplication uses the Hamilton convention `ij = k`, `jk = i`, `ki = j`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for "unit quaternion" checks.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Below this rotation magnitude `qexp` returns the exact identity.
const EXP_IDENTITY_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum AlgebraError {
    #[error("expected a unit quaternion, got norm {norm}")]
    NotUnit { norm: f64 },
    #[error("expected a pure-imaginary unit quaternion, got {0}")]
    NotPureImaginaryUnit(Quaternion),
}

/// Hyper-complex number `w + x i + y j + z k`.
#[derive(Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    /// A complex number `re + im i` embedded in the quaternions.
    pub const fn complex(re: f64, im: f64) -> Self {
        Self::new(re, im, 0.0, 0.0)
    }

    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm_squared(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    /// Real (scalar) part.
    pub fn re(self) -> f64 {
        self.w
    }

    /// True when the `j` and `k` parts vanish, i.e. the value is an ordinary complex number.
    pub fn is_complex(self) -> bool {
        self.y == 0.0 && self.z == 0.0
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }

    pub fn ensure_unit(self) -> Result<Self, AlgebraError> {
        if self.is_unit() {
            Ok(self)
        } else {
            Err(AlgebraError::NotUnit { norm: self.norm() })
        }
    }

    /// Unit quaternion with vanishing real part. These are exactly the values
    /// that square to -1, which a lossless beamsplitter reflection requires.
    pub fn ensure_pure_imaginary_unit(self) -> Result<Self, AlgebraError> {
        if self.is_unit() && self.w.abs() <= UNIT_TOLERANCE {
            Ok(self)
        } else {
            Err(AlgebraError::NotPureImaginaryUnit(self))
        }
    }

    /// Commutator `self * other - other * self`.
    pub fn commutator(self, other: Self) -> Self {
        self * other - other * self
    }
}

impl fmt::Debug for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}i + {}j + {}k)", self.w, self.x, self.y, self.z)
    }
}

impl Add for Quaternion {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Quaternion {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Quaternion {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl Mul for Quaternion {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        mul(self, o)
    }
}

impl Mul<f64> for Quaternion {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.scale(s)
    }
}

/// Hamilton product.
pub fn mul(a: Quaternion, b: Quaternion) -> Quaternion {
    Quaternion::new(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )
}

/// Product with the opposite handedness (`ij = -k`). Only used to show the
/// defect norms do not depend on the choice of convention.
pub fn mul_anti_hamilton(a: Quaternion, b: Quaternion) -> Quaternion {
    mul(b, a)
}

/// Three-component generalization of a complex phase: `i phi1 + j phi2 + k phi3`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseVector {
    pub phi1: f64,
    pub phi2: f64,
    pub phi3: f64,
}

impl PhaseVector {
    pub const fn new(phi1: f64, phi2: f64, phi3: f64) -> Self {
        Self { phi1, phi2, phi3 }
    }

    /// Ordinary complex phase `e^{i phi}`.
    pub const fn complex(phi: f64) -> Self {
        Self::new(phi, 0.0, 0.0)
    }

    pub fn magnitude(&self) -> f64 {
        (self.phi1 * self.phi1 + self.phi2 * self.phi2 + self.phi3 * self.phi3).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.phi1.is_finite() && self.phi2.is_finite() && self.phi3.is_finite()
    }

    pub fn is_complex(&self) -> bool {
        self.phi2 == 0.0 && self.phi3 == 0.0
    }
}

/// Exponential of the pure-imaginary quaternion `i phi1 + j phi2 + k phi3`.
pub fn qexp(v: PhaseVector) -> Quaternion {
    let theta = v.magnitude();
    if theta < EXP_IDENTITY_CUTOFF {
        return Quaternion::ONE;
    }
    let s = theta.sin() / theta;
    Quaternion::new(theta.cos(), v.phi1 * s, v.phi2 * s, v.phi3 * s)
}

/// `|a b - b a|`.
pub fn commutator_norm(a: Quaternion, b: Quaternion) -> f64 {
    a.commutator(b).norm()
}

/// Joint non-commutativity of two phases and a reflection unit: `|r a b - b a r|`.
pub fn generalized_defect(a: Quaternion, b: Quaternion, r: Quaternion) -> Result<f64, AlgebraError> {
    let r = r.ensure_unit()?;
    Ok((r * a * b - b * a * r).norm())
}

/// `|r P - Q r|` where `P` is the ordered product of `factors` and `Q` the
/// product in reverse order. Two factors give [`generalized_defect`].
pub fn ordered_defect(factors: &[Quaternion], r: Quaternion) -> f64 {
    let forward = factors.iter().fold(Quaternion::ONE, |acc, &q| acc * q);
    let reverse = factors.iter().rev().fold(Quaternion::ONE, |acc, &q| acc * q);
    (r * forward - reverse * r).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: Quaternion, b: Quaternion, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn hamilton_table() {
        let (one, i, j, k) = (Quaternion::ONE, Quaternion::I, Quaternion::J, Quaternion::K);
        assert_eq!(i * j, k);
        assert_eq!(j * i, -k);
        assert_eq!(j * k, i);
        assert_eq!(k * j, -i);
        assert_eq!(k * i, j);
        assert_eq!(i * k, -j);
        for u in [i, j, k] {
            assert_eq!(u * u, -one);
            assert_eq!(one * u, u);
        }
        assert_eq!(i * j * k, -one);
    }

    #[test]
    fn distributive_expansion() {
        let lhs = (Quaternion::ONE + Quaternion::I) * (Quaternion::ONE + Quaternion::J);
        assert_eq!(lhs, Quaternion::new(1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn conj_and_norm() {
        assert_eq!(Quaternion::I.conj(), -Quaternion::I);
        assert_eq!(Quaternion::new(1.0, 1.0, 1.0, 1.0).norm(), 2.0);
    }

    #[test]
    fn qexp_special_values() {
        assert_eq!(qexp(PhaseVector::default()), Quaternion::ONE);
        assert_eq!(qexp(PhaseVector::new(1e-13, 0.0, 0.0)), Quaternion::ONE);
        assert!(close(qexp(PhaseVector::complex(FRAC_PI_2)), Quaternion::I, 1e-15));
        // cos(0.1), sin(0.1) to 20 digits
        let q = qexp(PhaseVector::new(0.0, 0.1, 0.0));
        assert_abs_diff_eq!(q.w, 0.995_004_165_278_025_8, epsilon = 1e-16);
        assert_abs_diff_eq!(q.y, 0.099_833_416_646_828_15, epsilon = 1e-16);
        assert_eq!(q.x, 0.0);
        assert_eq!(q.z, 0.0);
    }

    #[test]
    fn commutator_examples() {
        let a = Quaternion::complex(0.3, 0.7);
        let b = Quaternion::complex(-1.2, 0.4);
        assert_eq!(commutator_norm(a, b), 0.0);
        assert_abs_diff_eq!(commutator_norm(Quaternion::J, Quaternion::K), 2.0);
        let half_pi = qexp(PhaseVector::new(0.0, FRAC_PI_2, 0.0));
        assert_abs_diff_eq!(commutator_norm(half_pi, Quaternion::I), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn commutator_matches_closed_form() {
        // |[e^{j eps}, e^{i phi}]| = 2 |sin eps sin phi|
        for &(eps, phi) in &[(0.1, 0.2), (0.7, 2.5), (FRAC_PI_2, FRAC_PI_2), (1.3, -0.4)] {
            let a = qexp(PhaseVector::new(0.0, eps, 0.0));
            let b = qexp(PhaseVector::complex(phi));
            let expected = 2.0 * (f64::sin(eps) * f64::sin(phi)).abs();
            assert_abs_diff_eq!(commutator_norm(a, b), expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn defect_examples() {
        let i = Quaternion::I;
        let a = Quaternion::complex(0.6, 0.8);
        let b = Quaternion::complex(0.0, -1.0);
        assert_abs_diff_eq!(generalized_defect(a, b, i).unwrap(), 0.0);
        assert_abs_diff_eq!(generalized_defect(Quaternion::J, Quaternion::K, i).unwrap(), 2.0);
        assert!(matches!(
            generalized_defect(a, b, Quaternion::new(0.0, 1.1, 0.0, 0.0)),
            Err(AlgebraError::NotUnit { .. })
        ));
    }

    #[test]
    fn defect_against_expanded_products() {
        // a = cos e + j sin e, b = cos p + i sin p, r = i.
        // i a b = -cos e sin p + i cos e cos p + j sin e sin p + k sin e cos p
        // b a i = -cos e sin p + i cos e cos p + j sin e sin p - k sin e cos p
        // difference = 2 k sin e cos p
        for &(e, p) in &[(0.3, PI), (0.05, 1.0), (1.1, -2.0)] {
            let a = qexp(PhaseVector::new(0.0, e, 0.0));
            let b = qexp(PhaseVector::complex(p));
            let expected = 2.0 * (f64::sin(e) * f64::cos(p)).abs();
            assert_abs_diff_eq!(
                generalized_defect(a, b, Quaternion::I).unwrap(),
                expected,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn ordered_defect_two_factors() {
        let a = qexp(PhaseVector::new(0.2, -0.4, 0.9));
        let b = qexp(PhaseVector::new(-1.0, 0.3, 0.1));
        let r = qexp(PhaseVector::new(0.0, FRAC_PI_2, 0.0));
        assert_abs_diff_eq!(
            ordered_defect(&[a, b], r),
            generalized_defect(a, b, r).unwrap(),
            epsilon = 1e-15
        );
        // a single factor reduces to the commutator with r
        assert_abs_diff_eq!(ordered_defect(&[b], r), commutator_norm(r, b), epsilon = 1e-15);
    }

    #[test]
    fn pure_imaginary_check() {
        assert!(Quaternion::I.ensure_pure_imaginary_unit().is_ok());
        assert!(Quaternion::ONE.ensure_pure_imaginary_unit().is_err());
        assert!(Quaternion::new(0.0, 0.5, 0.5, 0.0)
            .ensure_pure_imaginary_unit()
            .is_err());
    }

    fn quat() -> impl Strategy<Value = Quaternion> {
        (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(w, x, y, z)| Quaternion::new(w, x, y, z))
    }

    fn phase() -> impl Strategy<Value = PhaseVector> {
        (-7.0..7.0f64, -7.0..7.0f64, -7.0..7.0f64).prop_map(|(a, b, c)| PhaseVector::new(a, b, c))
    }

    proptest! {
        #[test]
        fn norm_is_multiplicative(a in quat(), b in quat()) {
            let lhs = (a * b).norm();
            let rhs = a.norm() * b.norm();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }

        #[test]
        fn mul_is_associative(a in quat(), b in quat(), c in quat()) {
            let scale = a.norm() * b.norm() * c.norm();
            prop_assert!(((a * b) * c - a * (b * c)).norm() <= 1e-12 * scale.max(1.0));
        }

        #[test]
        fn q_times_conj_is_real(q in quat()) {
            let p = q * q.conj();
            prop_assert!(close(p, Quaternion::ONE.scale(q.norm_squared()), 1e-12 * q.norm_squared().max(1.0)));
        }

        #[test]
        fn qexp_is_unit(v in phase()) {
            prop_assert!((qexp(v).norm() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn commutator_norm_symmetric(a in quat(), b in quat()) {
            prop_assert!((commutator_norm(a, b) - commutator_norm(b, a)).abs() <= 1e-12);
        }

        #[test]
        fn defect_reduces_to_commutator_for_complex_pairs(pa in -7.0..7.0f64, pb in -7.0..7.0f64) {
            let a = qexp(PhaseVector::complex(pa));
            let b = qexp(PhaseVector::complex(pb));
            let d = generalized_defect(a, b, Quaternion::I).unwrap();
            prop_assert!((d - commutator_norm(a, b)).abs() <= 1e-12);
        }

        #[test]
        fn defect_of_unit_quaternions_at_most_two(va in phase(), vb in phase(), vr in phase()) {
            let r = qexp(vr);
            let d = generalized_defect(qexp(va), qexp(vb), r).unwrap();
            prop_assert!(d <= 2.0 + 1e-12);
            prop_assert!(d * d <= 4.0 + 1e-11);
        }

        #[test]
        fn defect_norm_convention_independent(va in phase(), vb in phase(), vr in phase()) {
            let (a, b, r) = (qexp(va), qexp(vb), qexp(vr));
            let m = mul_anti_hamilton;
            let anti = (m(m(r, a), b) - m(m(b, a), r)).norm();
            let hamilton = generalized_defect(a, b, r).unwrap();
            prop_assert!((anti - hamilton).abs() <= 1e-12);
        }
    }
}
