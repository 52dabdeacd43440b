//! Rotation algebra on SO(3): skew operator, exponential and logarithm maps,
//! ZYX Euler angles, and the navigation-frame attitude increment pair
//! [`attitude_plus`] / [`attitude_minus`].
//!
//! A [`Dcm`] always stores the body-to-navigation rotation `C_b^n` unless a
//! function says otherwise. The navigation-to-body rotation is its transpose.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Rotation vector (axis times angle), radians.
pub type RotationVector = Vector3<f64>;

const SMALL_ANGLE: f64 = 1e-8;
/// Largest rotation angle accepted by [`log_so3`].
pub const MAX_LOG_ANGLE: f64 = PI - 1e-6;
/// Euler extraction is refused this close to |pitch| = pi/2.
pub const GIMBAL_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum AttitudeError {
    #[error("rotation angle {0} rad too close to pi for a unique logarithm")]
    NearPi(f64),
    #[error("pitch {0} rad too close to +-pi/2 for Euler extraction")]
    GimbalLock(f64),
    #[error("non-finite rotation input")]
    NonFinite,
}

/// Direction cosine matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dcm(Matrix3<f64>);

impl Dcm {
    pub fn identity() -> Self {
        Dcm(Matrix3::identity())
    }

    /// Wraps a matrix without checking orthonormality.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Dcm(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Dcm(self.0.transpose())
    }

    /// Largest absolute entry of `CᵀC − I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).amax()
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    /// Symmetric re-orthonormalization, `C ← C (CᵀC)^{-1/2}` to first order:
    /// `C ← C − ½ C (CᵀC − I)`.
    pub fn orthonormalized(&self) -> Self {
        let c = self.0;
        let err = c.transpose() * c - Matrix3::identity();
        Dcm(c - 0.5 * c * err)
    }
}

impl Mul for Dcm {
    type Output = Dcm;
    fn mul(self, rhs: Dcm) -> Dcm {
        Dcm(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for Dcm {
    type Output = Vector3<f64>;
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

impl Mul<&Vector3<f64>> for &Dcm {
    type Output = Vector3<f64>;
    fn mul(self, rhs: &Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

/// Roll, pitch, yaw in radians (intrinsic Z-Y-X: yaw first, then pitch, then roll).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.roll, self.pitch, self.yaw)
    }
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`] for the antisymmetric part of `m`.
fn vee_antisym(m: &Matrix3<f64>) -> Vector3<f64> {
    0.5 * Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

/// Rodrigues formula. Below 1e-8 rad the second-order series is used.
pub fn exp_so3(theta: &RotationVector) -> Dcm {
    let k = skew(theta);
    let angle2 = theta.norm_squared();
    let angle = angle2.sqrt();
    if angle < SMALL_ANGLE {
        return Dcm(Matrix3::identity() + k + 0.5 * k * k);
    }
    let a = angle.sin() / angle;
    let b = (1.0 - angle.cos()) / angle2;
    Dcm(Matrix3::identity() + a * k + b * k * k)
}

pub fn log_so3(c: &Dcm) -> Result<RotationVector, AttitudeError> {
    let m = c.matrix();
    if !m.iter().all(|x| x.is_finite()) {
        return Err(AttitudeError::NonFinite);
    }
    // w = sin(angle) * axis
    let w = vee_antisym(m);
    let s = w.norm();
    let cos = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let angle = s.atan2(cos);
    if angle >= MAX_LOG_ANGLE {
        return Err(AttitudeError::NearPi(angle));
    }
    if angle < SMALL_ANGLE {
        // angle / sin(angle) ≈ 1 + angle²/6
        return Ok(w * (1.0 + angle * angle / 6.0));
    }
    Ok(w * (angle / s))
}

/// Body-to-navigation DCM from ZYX Euler angles.
pub fn euler_to_dcm(e: &EulerAngles) -> Dcm {
    let (sr, cr) = e.roll.sin_cos();
    let (sp, cp) = e.pitch.sin_cos();
    let (sy, cy) = e.yaw.sin_cos();
    Dcm(Matrix3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    ))
}

pub fn dcm_to_euler(c: &Dcm) -> Result<EulerAngles, AttitudeError> {
    let m = c.matrix();
    let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
    if pitch.abs() >= FRAC_PI_2 - GIMBAL_GUARD {
        return Err(AttitudeError::GimbalLock(pitch));
    }
    let roll = m[(2, 1)].atan2(m[(2, 2)]);
    let yaw = m[(1, 0)].atan2(m[(0, 0)]);
    Ok(EulerAngles { roll, pitch, yaw })
}

/// `C ⊕ δψ`: applies a misalignment expressed in the navigation frame,
/// `exp(δψ) · C`.
pub fn attitude_plus(c: &Dcm, delta: &RotationVector) -> Dcm {
    exp_so3(delta) * *c
}

/// `C₁ ⊖ C₂`: the navigation-frame rotation vector taking `C₂` to `C₁`,
/// `log(C₁ · C₂ᵀ)`. Identical inputs give an exactly zero vector.
pub fn attitude_minus(c1: &Dcm, c2: &Dcm) -> Result<RotationVector, AttitudeError> {
    log_so3(&(*c1 * c2.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_valid(c: &Dcm) {
        assert!(c.orthonormality_error() < 1e-9);
        assert!((c.determinant() - 1.0).abs() < 1e-9);
    }

    fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vector3<f64> {
        Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ) * scale
    }

    #[test]
    fn skew_definition() {
        assert_eq!(skew(&Vector3::zeros()), Matrix3::zeros());
        let k = skew(&Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(k, Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let v = random_vec(&mut rng, 3.0);
            let w = random_vec(&mut rng, 3.0);
            let k = skew(&v);
            assert_eq!(k.transpose(), -k);
            assert!((k * w - v.cross(&w)).norm() < 1e-14);
            assert!((k * v).norm() < 1e-14);
        }
    }

    #[test]
    fn exp_quarter_turn_about_z() {
        let c = exp_so3(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        // Rodrigues by hand: I + K + 0 for sin=1, (1-cos)/θ² · θ² = 1 on K²
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((c.matrix() - expected).amax() < 1e-15);
        assert!((c * Vector3::x() - Vector3::y()).norm() < 1e-15);
        assert_eq!(exp_so3(&Vector3::zeros()), Dcm::identity());
    }

    #[test]
    fn exp_taylor_remainder_is_second_order() {
        let axis = Vector3::new(0.3, -0.5, 0.8).normalize();
        for &a in &[1e-3, 5e-4, 2.5e-4, 1e-6, 1e-9] {
            let th = axis * a;
            let r = (exp_so3(&th).matrix() - (Matrix3::identity() + skew(&th))).norm();
            assert!(r <= a * a, "remainder {r} at {a}");
            assert!(r >= 0.25 * a * a || a < 1e-7);
        }
    }

    #[test]
    fn exp_is_orthonormal_and_odd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let th = random_vec(&mut rng, 3.0);
            let c = exp_so3(&th);
            assert_valid(&c);
            assert!((exp_so3(&-th).matrix() - c.matrix().transpose()).amax() < 1e-14);
        }
    }

    #[test]
    fn log_small_angle_matches_quaternion_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let th = random_vec(&mut rng, 1e-7);
            let q = UnitQuaternion::from_scaled_axis(th);
            let c = Dcm::from_matrix_unchecked(q.to_rotation_matrix().into_inner());
            let oracle = q.scaled_axis();
            let got = log_so3(&c).unwrap();
            assert!((got - oracle).norm() < 1e-12);
        }
    }

    #[test]
    fn log_identity_and_near_pi() {
        assert_eq!(log_so3(&Dcm::identity()).unwrap(), Vector3::zeros());
        let c = exp_so3(&Vector3::new(0.0, PI - 1e-8, 0.0));
        assert!(matches!(log_so3(&c), Err(AttitudeError::NearPi(_))));
    }

    #[test]
    fn exp_log_inverse_up_to_near_pi() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..2000 {
            let dir = random_vec(&mut rng, 1.0).normalize();
            let angle = rng.random_range(0.0..PI - 1e-3);
            let th = dir * angle;
            let back = log_so3(&exp_so3(&th)).unwrap();
            assert!((back - th).norm() < 1e-9, "{th} vs {back}");
        }
    }

    #[test]
    fn euler_identity_and_yaw_only() {
        assert_eq!(euler_to_dcm(&EulerAngles::default()), Dcm::identity());
        let yaw = euler_to_dcm(&EulerAngles::new(0.0, 0.0, FRAC_PI_2));
        let rot = exp_so3(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        assert!((yaw.matrix() - rot.matrix()).amax() < 1e-15);
    }

    #[test]
    fn euler_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let e = EulerAngles::new(
                rng.random_range(-PI + 1e-6..PI),
                rng.random_range(-1.5..1.5),
                rng.random_range(-PI + 1e-6..PI),
            );
            let c = euler_to_dcm(&e);
            assert_valid(&c);
            let back = dcm_to_euler(&c).unwrap();
            assert!((back.roll - e.roll).abs() < 1e-9);
            assert!((back.pitch - e.pitch).abs() < 1e-9);
            assert!((back.yaw - e.yaw).abs() < 1e-9);
        }
    }

    #[test]
    fn euler_composition_order_is_zyx() {
        let e = EulerAngles::new(0.2, -0.3, 1.1);
        let composed = exp_so3(&Vector3::new(0.0, 0.0, e.yaw))
            * exp_so3(&Vector3::new(0.0, e.pitch, 0.0))
            * exp_so3(&Vector3::new(e.roll, 0.0, 0.0));
        assert!((euler_to_dcm(&e).matrix() - composed.matrix()).amax() < 1e-15);
    }

    #[test]
    fn gimbal_lock_rejected() {
        let c = euler_to_dcm(&EulerAngles::new(0.1, FRAC_PI_2, 0.2));
        assert!(matches!(dcm_to_euler(&c), Err(AttitudeError::GimbalLock(_))));
    }

    #[test]
    fn plus_minus_basics() {
        let c = euler_to_dcm(&EulerAngles::new(0.1, 0.2, -2.0));
        assert_eq!(attitude_plus(&c, &Vector3::zeros()), c);
        let th = Vector3::new(0.1, -0.2, 0.3);
        assert_eq!(attitude_plus(&Dcm::identity(), &th), exp_so3(&th));
        assert_eq!(attitude_minus(&c, &c).unwrap(), Vector3::zeros());
        let c1 = exp_so3(&th) * c;
        assert!((attitude_minus(&c1, &c).unwrap() - th).norm() < 1e-12);
    }

    #[test]
    fn minus_is_antisymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let c2 = exp_so3(&random_vec(&mut rng, 3.0));
            let c1 = exp_so3(&random_vec(&mut rng, 0.1)) * c2;
            let a = attitude_minus(&c1, &c2).unwrap();
            let b = attitude_minus(&c2, &c1).unwrap();
            assert!((a + b).norm() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn plus_then_minus_recovers_increment(
            base in prop::array::uniform3(-3.0f64..3.0),
            d in prop::array::uniform3(-0.55f64..0.55),
        ) {
            let c = exp_so3(&Vector3::from(base));
            let delta = Vector3::from(d);
            let c1 = attitude_plus(&c, &delta);
            assert_valid(&c1);
            let back = attitude_minus(&c1, &c).unwrap();
            prop_assert!((back - delta).norm() < 1e-9);
            let again = attitude_plus(&c, &back);
            prop_assert!((again.matrix() - c1.matrix()).amax() < 1e-9);
        }
    }
}
