//! Translational guidance and reference attitude generation.
//!
//! All guidance laws produce the NET vehicle acceleration. Gravity
//! compensation happens in exactly one place, [`accel_to_thrust`].

use std::f64::consts::PI;

use thiserror::Error;

use crate::dynamics::{RigidBodyState, VehicleParams};
use crate::rotation::{thrust_axis, Quaternion, Vec3};

const DEGENERATE_ACCEL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GuidanceError {
    #[error("time to go {tgo} s is below the minimum {tgo_min} s")]
    TgoTooSmall { tgo: f64, tgo_min: f64 },
    #[error("thrust acceleration {0:e} m/s² has no defined direction")]
    DegenerateDirection(f64),
}

/// Two-point boundary conditions of one descent segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryConditions {
    pub r0: Vec3,
    pub v0: Vec3,
    pub a0: Vec3,
    pub rf: Vec3,
    pub vf: Vec3,
    pub af: Vec3,
    pub tgo: f64,
}

/// Per-axis coefficients of `a(t) = c0 + c1 t + c2 t² + c3 t³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicCoeffs {
    pub c0: Vec3,
    pub c1: Vec3,
    pub c2: Vec3,
    pub c3: Vec3,
}

impl CubicCoeffs {
    pub fn zero() -> Self {
        Self {
            c0: Vec3::zeros(),
            c1: Vec3::zeros(),
            c2: Vec3::zeros(),
            c3: Vec3::zeros(),
        }
    }

    pub fn as_array(&self) -> [Vec3; 4] {
        [self.c0, self.c1, self.c2, self.c3]
    }

    /// Velocity gained over `[0, t]`.
    pub fn delta_v(&self, t: f64) -> Vec3 {
        t * (self.c0 + t * (self.c1 / 2.0 + t * (self.c2 / 3.0 + t * self.c3 / 4.0)))
    }

    /// Displacement over `[0, t]` starting from zero velocity.
    pub fn delta_r(&self, t: f64) -> Vec3 {
        t * t * (self.c0 / 2.0 + t * (self.c1 / 6.0 + t * (self.c2 / 12.0 + t * self.c3 / 20.0)))
    }
}

// Constraint matrix in normalized time τ = t/tgo, unknowns c_k·tgo^k.
// Rows: a(0), a(tgo), Δv / tgo, (Δr − v0 tgo) / tgo².
const NORMALIZED_BVP: [[f64; 4]; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 1.0, 1.0],
    [1.0, 1.0 / 2.0, 1.0 / 3.0, 1.0 / 4.0],
    [1.0 / 2.0, 1.0 / 6.0, 1.0 / 12.0, 1.0 / 20.0],
];

/// Gaussian elimination with partial pivoting on a 4×4 system, three
/// right-hand sides (one per axis).
fn solve4(mut a: [[f64; 4]; 4], mut b: [[f64; 3]; 4]) -> [[f64; 3]; 4] {
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            for k in 0..3 {
                b[row][k] -= f * b[col][k];
            }
        }
    }
    let mut x = [[0.0; 3]; 4];
    for row in (0..4).rev() {
        for k in 0..3 {
            let mut acc = b[row][k];
            for j in row + 1..4 {
                acc -= a[row][j] * x[j][k];
            }
            x[row][k] = acc / a[row][row];
        }
    }
    x
}

/// Solve the cubic acceleration profile meeting `(r, v, a)` at both ends.
pub fn solve_cubic_coeffs(
    bc: &BoundaryConditions,
    tgo_min: f64,
) -> Result<CubicCoeffs, GuidanceError> {
    let t = bc.tgo;
    if !(t >= tgo_min) {
        return Err(GuidanceError::TgoTooSmall { tgo: t, tgo_min });
    }
    let dv = (bc.vf - bc.v0) / t;
    let dr = (bc.rf - bc.r0 - bc.v0 * t) / (t * t);
    let mut rhs = [[0.0; 3]; 4];
    for i in 0..3 {
        rhs[0][i] = bc.a0[i];
        rhs[1][i] = bc.af[i];
        rhs[2][i] = dv[i];
        rhs[3][i] = dr[i];
    }
    let x = solve4(NORMALIZED_BVP, rhs);
    let coeff = |k: usize| Vec3::new(x[k][0], x[k][1], x[k][2]) / t.powi(k as i32);
    Ok(CubicCoeffs {
        c0: coeff(0),
        c1: coeff(1),
        c2: coeff(2),
        c3: coeff(3),
    })
}

/// Horner evaluation of the commanded net acceleration.
pub fn eval_guidance_accel(c: &CubicCoeffs, t: f64) -> Vec3 {
    c.c0 + t * (c.c1 + t * (c.c2 + t * c.c3))
}

/// Position/velocity hold gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvGains {
    pub kr: f64,
    pub kv: f64,
}

impl PvGains {
    /// Second-order pole placement from a natural frequency in rad/s.
    pub fn from_natural_frequency(omega_n: f64, zeta: f64) -> Self {
        Self {
            kr: omega_n * omega_n,
            kv: 2.0 * zeta * omega_n,
        }
    }

    pub fn from_bandwidth_hz(f: f64, zeta: f64) -> Self {
        Self::from_natural_frequency(2.0 * PI * f, zeta)
    }
}

pub fn hover_pv_accel(r_ref: &Vec3, v_ref: &Vec3, r: &Vec3, v: &Vec3, gains: &PvGains) -> Vec3 {
    (r_ref - r) * gains.kr + (v_ref - v) * gains.kv
}

/// Thrust acceleration and clamped thrust magnitude for a net command.
pub fn accel_to_thrust(
    a_net: &Vec3,
    s: &RigidBodyState,
    params: &VehicleParams,
) -> Result<(Vec3, f64), GuidanceError> {
    let a_thrust = a_net - params.gravity;
    let n = a_thrust.norm();
    if n < DEGENERATE_ACCEL {
        return Err(GuidanceError::DegenerateDirection(n));
    }
    let demand = s.m * n;
    let thrust = demand.clamp(params.thrust_min, params.thrust_max);
    if thrust == demand {
        Ok((a_thrust, thrust))
    } else {
        Ok((a_thrust * (thrust / demand), thrust))
    }
}

/// Shortest-arc rotation taking the body thrust axis onto `a_thrust`.
pub fn shortest_rotation_quat(a_thrust: &Vec3) -> Quaternion {
    let t = thrust_axis();
    let a = a_thrust.normalize();
    let theta = t.dot(&a).clamp(-1.0, 1.0).acos();
    let n = t.cross(&a);
    let n_norm = n.norm();
    let axis = if n_norm > 1e-12 {
        n / n_norm
    } else if theta > 0.5 * PI {
        Vec3::z()
    } else {
        return Quaternion::identity();
    };
    let (s, c) = (0.5 * theta).sin_cos();
    Quaternion { q0: c, qv: axis * s }
}

/// `q_ref = q_guid ⊗ q(A[φ_cmd])`.
pub fn compose_reference(q_guid: &Quaternion, phi_cmd: f64) -> Quaternion {
    *q_guid * Quaternion::from_roll(phi_cmd)
}

pub fn tgo_update(tgo_prev: f64, dt: f64, tgo_min: f64) -> f64 {
    (tgo_prev - dt).max(tgo_min)
}

/// Output of one guidance cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceCommand {
    /// Net commanded vehicle acceleration.
    pub a_net: Vec3,
    pub a_thrust: Vec3,
    pub thrust: f64,
    pub q_guid: Quaternion,
    pub q_ref: Quaternion,
    pub phi_cmd: f64,
}

impl GuidanceCommand {
    /// Assemble a command from a net acceleration. When the thrust direction
    /// is undefined the previous pointing `hold` is kept.
    pub fn from_net_accel(
        a_net: Vec3,
        s: &RigidBodyState,
        params: &VehicleParams,
        phi_cmd: f64,
        hold: &Quaternion,
    ) -> Self {
        let (a_thrust, thrust, q_guid) = match accel_to_thrust(&a_net, s, params) {
            Ok((a_thrust, thrust)) => (a_thrust, thrust, shortest_rotation_quat(&a_thrust)),
            Err(_) => {
                let thrust = params.thrust_min;
                let dir = hold.rotate(&thrust_axis());
                (dir * (thrust / s.m), thrust, *hold)
            }
        };
        Self {
            a_net,
            a_thrust,
            thrust,
            q_guid,
            q_ref: compose_reference(&q_guid, phi_cmd),
            phi_cmd,
        }
    }
}
