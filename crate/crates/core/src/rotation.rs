//! Attitude mathematics: scalar-first quaternions, direction cosine matrices
//! and the 1-3-2 thrust-axis roll extraction.
//!
//! Convention: a [`Quaternion`] is the attitude of the body frame with respect
//! to the local North-Up-East frame. [`Quaternion::rotate`] maps body-frame
//! vectors into the local frame, and composition follows
//! `(a * b).rotate(v) == a.rotate(b.rotate(v))`.
//!
//! A [`Dcm`] is the attitude matrix in the classical spacecraft sense: it maps
//! local-frame coordinates into body-frame coordinates, `v_body = A v_local`.
//! The elementary roll matrix about the thrust (body y) axis is therefore
//!
//! ```text
//!        [ cos φ  0  -sin φ ]
//! A[φ] = [   0    1    0    ]
//!        [ sin φ  0   cos φ ]
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Mul, Neg};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Body-frame thrust direction: engines fire along the positive roll (y) axis.
pub const THRUST_AXIS: [f64; 3] = [0.0, 1.0, 0.0];

pub fn thrust_axis() -> Vec3 {
    Vec3::new(THRUST_AXIS[0], THRUST_AXIS[1], THRUST_AXIS[2])
}

const ZERO_AXIS_TOL: f64 = 1e-12;
const SO3_TOL: f64 = 1e-6;
const GIMBAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RotationError {
    #[error("rotation axis has zero length (|axis| = {0:e})")]
    ZeroAxis(f64),
    #[error("matrix is not a proper rotation (orthonormality defect {defect:e}, det {det})")]
    NotSO3 { defect: f64, det: f64 },
}

/// Unit attitude quaternion `[q0, q1, q2, q3]`, scalar first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub q0: f64,
    pub qv: Vec3,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}, {}, {}]",
            self.q0, self.qv.x, self.qv.y, self.qv.z
        )
    }
}

impl Quaternion {
    pub fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        Self {
            q0,
            qv: Vec3::new(q1, q2, q3),
        }
    }

    pub fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.q0, self.qv.x, self.qv.y, self.qv.z]
    }

    pub fn norm(&self) -> f64 {
        (self.q0 * self.q0 + self.qv.norm_squared()).sqrt()
    }

    pub fn normalize(&self) -> Self {
        let n = self.norm();
        Self {
            q0: self.q0 / n,
            qv: self.qv / n,
        }
    }

    /// Flip to the representative with a non-negative scalar part.
    pub fn canonical(&self) -> Self {
        if self.q0 < 0.0 {
            -*self
        } else {
            *self
        }
    }

    /// Conjugate, which is the inverse for unit quaternions.
    pub fn inverse(&self) -> Self {
        Self {
            q0: self.q0,
            qv: -self.qv,
        }
    }

    /// `[cos(θ/2), n̂ sin(θ/2)]`; the axis is normalized internally.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Result<Self, RotationError> {
        let n = axis.norm();
        if n <= ZERO_AXIS_TOL {
            return Err(RotationError::ZeroAxis(n));
        }
        let (s, c) = (0.5 * angle).sin_cos();
        Ok(Self {
            q0: c,
            qv: axis * (s / n),
        })
    }

    /// Rotation about the body thrust axis, i.e. the quaternion of `A[φ]`.
    pub fn from_roll(phi: f64) -> Self {
        let (s, c) = (0.5 * phi).sin_cos();
        Self::new(c, 0.0, s, 0.0).canonical()
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let c = self.canonical();
        2.0 * c.qv.norm().atan2(c.q0)
    }

    /// Hamilton product without renormalization.
    pub fn hamilton(&self, rhs: &Quaternion) -> Quaternion {
        Quaternion {
            q0: self.q0 * rhs.q0 - self.qv.dot(&rhs.qv),
            qv: rhs.qv * self.q0 + self.qv * rhs.q0 + self.qv.cross(&rhs.qv),
        }
    }

    /// Map a body-frame vector into the local frame.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        let t = self.qv.cross(v) * 2.0;
        v + t * self.q0 + self.qv.cross(&t)
    }

    /// Attitude matrix, local → body.
    pub fn to_dcm(&self) -> Dcm {
        let (q0, q1, q2, q3) = (self.q0, self.qv.x, self.qv.y, self.qv.z);
        Dcm(Matrix3::new(
            q0 * q0 + q1 * q1 - q2 * q2 - q3 * q3,
            2.0 * (q1 * q2 + q0 * q3),
            2.0 * (q1 * q3 - q0 * q2),
            2.0 * (q1 * q2 - q0 * q3),
            q0 * q0 - q1 * q1 + q2 * q2 - q3 * q3,
            2.0 * (q2 * q3 + q0 * q1),
            2.0 * (q1 * q3 + q0 * q2),
            2.0 * (q2 * q3 - q0 * q1),
            q0 * q0 - q1 * q1 - q2 * q2 + q3 * q3,
        ))
    }

    /// Rotation about the thrust axis from the 1-3-2 Euler sequence.
    pub fn thrust_roll(&self) -> f64 {
        self.thrust_roll_checked().angle
    }

    pub fn thrust_roll_checked(&self) -> RollExtraction {
        let (q0, q1, q2, q3) = (self.q0, self.qv.x, self.qv.y, self.qv.z);
        // A31 and A11 of the attitude matrix.
        let num = 2.0 * (q1 * q3 + q2 * q0);
        let den = q0 * q0 + q1 * q1 - q2 * q2 - q3 * q3;
        RollExtraction {
            angle: fold_pi(num.atan2(den)),
            degenerate: num.abs() < GIMBAL_TOL && den.abs() < GIMBAL_TOL,
        }
    }
}

/// Result of a thrust-roll extraction. `degenerate` marks the gimbal-lock
/// configuration (middle angle at ±90°) where the roll is undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollExtraction {
    pub angle: f64,
    pub degenerate: bool,
}

// atan2 returns [-π, π]; fold the lower endpoint onto +π.
fn fold_pi(a: f64) -> f64 {
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    /// Composition `self ⊗ rhs`, renormalized.
    fn mul(self, rhs: Quaternion) -> Quaternion {
        self.hamilton(&rhs).normalize()
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;

    fn neg(self) -> Quaternion {
        Quaternion {
            q0: -self.q0,
            qv: -self.qv,
        }
    }
}

/// Attitude matrix (local → body), stored row-major as a 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dcm(pub Matrix3<f64>);

impl Dcm {
    pub fn identity() -> Self {
        Dcm(Matrix3::identity())
    }

    /// `A[φ]`, the elementary rotation about the body thrust axis.
    pub fn roll(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Dcm(Matrix3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Largest absolute entry of `AᵀA − I`.
    pub fn orthonormality_defect(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).amax()
    }

    /// Closed-form quaternion extraction with Shepperd's branch selection.
    /// Output is sign-normalized to `q0 ≥ 0`.
    pub fn to_quat(&self) -> Result<Quaternion, RotationError> {
        let defect = self.orthonormality_defect();
        let det = self.0.determinant();
        if defect > SO3_TOL || (det - 1.0).abs() > SO3_TOL {
            return Err(RotationError::NotSO3 { defect, det });
        }
        let a = &self.0;
        let trace = a.trace();
        let (a11, a22, a33) = (a[(0, 0)], a[(1, 1)], a[(2, 2)]);
        let q = if trace >= a11 && trace >= a22 && trace >= a33 {
            let q0 = 0.5 * (1.0 + trace).sqrt();
            let k = 0.25 / q0;
            Quaternion::new(
                q0,
                (a[(1, 2)] - a[(2, 1)]) * k,
                (a[(2, 0)] - a[(0, 2)]) * k,
                (a[(0, 1)] - a[(1, 0)]) * k,
            )
        } else if a11 >= a22 && a11 >= a33 {
            let q1 = 0.5 * (1.0 + 2.0 * a11 - trace).sqrt();
            let k = 0.25 / q1;
            Quaternion::new(
                (a[(1, 2)] - a[(2, 1)]) * k,
                q1,
                (a[(0, 1)] + a[(1, 0)]) * k,
                (a[(0, 2)] + a[(2, 0)]) * k,
            )
        } else if a22 >= a33 {
            let q2 = 0.5 * (1.0 + 2.0 * a22 - trace).sqrt();
            let k = 0.25 / q2;
            Quaternion::new(
                (a[(2, 0)] - a[(0, 2)]) * k,
                (a[(0, 1)] + a[(1, 0)]) * k,
                q2,
                (a[(1, 2)] + a[(2, 1)]) * k,
            )
        } else {
            let q3 = 0.5 * (1.0 + 2.0 * a33 - trace).sqrt();
            let k = 0.25 / q3;
            Quaternion::new(
                (a[(0, 1)] - a[(1, 0)]) * k,
                (a[(0, 2)] + a[(2, 0)]) * k,
                (a[(1, 2)] + a[(2, 1)]) * k,
                q3,
            )
        };
        Ok(q.normalize().canonical())
    }

    /// Apply to a local-frame vector, yielding body-frame coordinates.
    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }
}
