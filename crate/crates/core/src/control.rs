//! Attitude control laws.
//!
//! Two controllers share the same PD structure and gyroscopic feedforward:
//!
//! * the coupled law tracks `q_ref = q_guid ⊗ q(A[φ_cmd])` with the full
//!   error quaternion, so a large roll demand is folded into the same
//!   eigen-axis rotation as the thrust pointing correction;
//! * the decoupled law takes lateral (yaw/pitch) errors against
//!   `q_refL = q_guid ⊗ q(A[φ_b])`, where `φ_b` is the roll currently
//!   achieved, and drives roll separately on `φ_b − φ_cmd`.
//!
//! Quaternion vector errors are doubled so that all three axes use
//! angle-domain errors and share gain units.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{RigidBodyState, VehicleParams};
use crate::rotation::{Quaternion, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Coupled,
    Decoupled,
}

impl ControllerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerKind::Coupled => "coupled",
            ControllerKind::Decoupled => "decoupled",
        }
    }
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "coupled" => Ok(ControllerKind::Coupled),
            "decoupled" => Ok(ControllerKind::Decoupled),
            other => Err(format!("unknown controller `{other}` (expected coupled|decoupled)")),
        }
    }
}

/// Diagonal PD gains, one entry per body axis (yaw, roll, pitch).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlGains {
    pub kp: Vec3,
    pub kd: Vec3,
}

/// Per-axis pole placement: `kp = I ω_n²`, `kd = 2 ζ ω_n I`, `ω_n = 2πf`.
pub fn gains_from_bandwidth(f_hz: f64, zeta: f64, inertia: &Vec3) -> ControlGains {
    gains_from_natural_frequency(2.0 * PI * f_hz, zeta, inertia)
}

pub fn gains_from_natural_frequency(omega_n: f64, zeta: f64, inertia: &Vec3) -> ControlGains {
    ControlGains {
        kp: inertia * (omega_n * omega_n),
        kd: inertia * (2.0 * zeta * omega_n),
    }
}

/// Wrap into `(−π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = x.rem_euclid(two_pi);
    if y > PI {
        y -= two_pi;
    }
    y
}

/// `q_e = q_ref⁻¹ ⊗ q`, sign-selected so that `q_e0 ≥ 0`.
pub fn error_quaternion(q_ref: &Quaternion, q: &Quaternion) -> Quaternion {
    (q_ref.inverse() * *q).canonical()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeErrors {
    pub d_roll: f64,
    pub d_yaw: f64,
    pub d_pitch: f64,
    pub w_err: Vec3,
}

impl AttitudeErrors {
    /// Angle-domain error vector in body axis order (yaw, roll, pitch).
    pub fn angles(&self) -> Vec3 {
        Vec3::new(self.d_yaw, self.d_roll, self.d_pitch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerOutput {
    pub tau: Vec3,
    pub saturated: [bool; 3],
}

fn gyroscopic(w: &Vec3, params: &VehicleParams) -> Vec3 {
    w.cross(&params.inertia.component_mul(w))
}

fn saturate(tau: Vec3, params: &VehicleParams) -> ControllerOutput {
    let mut out = tau;
    let mut saturated = [false; 3];
    for i in 0..3 {
        let lim = params.tau_max[i];
        if out[i].abs() > lim {
            out[i] = lim.copysign(out[i]);
            saturated[i] = true;
        }
    }
    ControllerOutput { tau: out, saturated }
}

fn pd_law(angles: &Vec3, w_err: &Vec3, s: &RigidBodyState, gains: &ControlGains, params: &VehicleParams) -> ControllerOutput {
    let tau = -gains.kp.component_mul(angles) - gains.kd.component_mul(w_err) + gyroscopic(&s.w, params);
    saturate(tau, params)
}

/// Classical quaternion PD law on the full reference attitude.
pub fn coupled_pd_torque(
    q_ref: &Quaternion,
    s: &RigidBodyState,
    w_ref: &Vec3,
    gains: &ControlGains,
    params: &VehicleParams,
) -> ControllerOutput {
    let q_e = error_quaternion(q_ref, &s.q);
    pd_law(&(q_e.qv * 2.0), &(s.w - w_ref), s, gains, params)
}

/// Lateral errors against the roll-augmented guidance reference, roll error
/// against the mission command.
pub fn decoupled_errors(
    q_guid: &Quaternion,
    q: &Quaternion,
    phi_cmd: f64,
    w: &Vec3,
    w_ref: &Vec3,
) -> AttitudeErrors {
    let phi_b = q.thrust_roll();
    let q_ref_lateral = *q_guid * Quaternion::from_roll(phi_b);
    let q_e = error_quaternion(&q_ref_lateral, q);
    AttitudeErrors {
        d_roll: wrap_angle(phi_b - phi_cmd),
        d_yaw: 2.0 * q_e.qv.x,
        d_pitch: 2.0 * q_e.qv.z,
        w_err: w - w_ref,
    }
}

pub fn decoupled_pd_torque(
    errs: &AttitudeErrors,
    s: &RigidBodyState,
    gains: &ControlGains,
    params: &VehicleParams,
) -> ControllerOutput {
    pd_law(&errs.angles(), &errs.w_err, s, gains, params)
}
