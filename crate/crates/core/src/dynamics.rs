//! Rigid-body plant.
//!
//! The closed loop runs on the non-rotating flat-moon model: `ṙ = v`,
//! `v̇ = g + a`, `ṁ = −T/(Isp g0)`, Euler's moment equation and quaternion
//! kinematics `q̇ = ½ q ⊗ [0, ω]` (body rates). The spherical point-mass model
//! is kept alongside for open-loop validation of the flat approximation.

use std::f64::consts::PI;

use thiserror::Error;

use crate::rotation::{thrust_axis, Quaternion, Vec3};

/// Standard gravity used in the mass-flow relation.
pub const G0: f64 = 9.81;
/// Lunar gravitational parameter, m³/s².
pub const MOON_MU: f64 = 4.902_800_066e12;
/// Mean lunar radius, m.
pub const MOON_RADIUS: f64 = 1_737_400.0;
/// Lunar sidereal rotation rate, rad/s.
pub const MOON_ROTATION_RATE: f64 = 2.661_7e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite state derivative")]
    NonFinite,
    #[error("spherical state at the pole singularity (|cos φ| = {0:e})")]
    PoleSingularity(f64),
}

/// Vehicle constants. Thrust limits are totals across all engines.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    pub inertia: Vec3,
    pub isp: f64,
    pub g0: f64,
    pub gravity: Vec3,
    pub thrust_min: f64,
    pub thrust_max: f64,
    pub tau_max: Vec3,
    pub dry_mass: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            inertia: Vec3::new(400.0, 300.0, 450.0),
            isp: 230.0,
            g0: G0,
            gravity: Vec3::new(0.0, -1.62, 0.0),
            thrust_min: 2.0 * 360.0,
            thrust_max: 2.0 * 800.0,
            tau_max: Vec3::new(50.0, 50.0, 50.0),
            dry_mass: 600.0,
        }
    }
}

/// Translational and rotational state. Position and velocity are in the
/// local NUE frame; `w` is the body rate (x = yaw, y = roll, z = pitch).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyState {
    pub r: Vec3,
    pub v: Vec3,
    pub m: f64,
    pub q: Quaternion,
    pub w: Vec3,
}

impl RigidBodyState {
    pub fn at_rest(r: Vec3, m: f64) -> Self {
        Self {
            r,
            v: Vec3::zeros(),
            m,
            q: Quaternion::identity(),
            w: Vec3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.r.iter().all(|x| x.is_finite())
            && self.v.iter().all(|x| x.is_finite())
            && self.m.is_finite()
            && self.q.to_array().iter().all(|x| x.is_finite())
            && self.w.iter().all(|x| x.is_finite())
    }

    /// Thrust direction in the local frame.
    pub fn thrust_direction(&self) -> Vec3 {
        self.q.rotate(&thrust_axis())
    }
}

/// Actuator inputs held constant over one integration step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantInputs {
    pub thrust: f64,
    pub torque: Vec3,
}

/// Time derivative of [`RigidBodyState`]. `dq` is a raw quaternion rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateRate {
    pub dr: Vec3,
    pub dv: Vec3,
    pub dm: f64,
    pub dq: Quaternion,
    pub dw: Vec3,
}

impl StateRate {
    fn is_finite(&self) -> bool {
        self.dr.iter().chain(self.dv.iter()).chain(self.dw.iter()).all(|x| x.is_finite())
            && self.dm.is_finite()
            && self.dq.to_array().iter().all(|x| x.is_finite())
    }
}

/// Flat-moon translational rates: `(ṙ, v̇) = (v, g + a_thrust)`.
pub fn flat_translational_deriv(
    s: &RigidBodyState,
    thrust_accel: &Vec3,
    params: &VehicleParams,
) -> (Vec3, Vec3) {
    (s.v, params.gravity + thrust_accel)
}

/// Euler moment equation and quaternion kinematics.
pub fn rotational_deriv(
    s: &RigidBodyState,
    tau: &Vec3,
    params: &VehicleParams,
) -> (Vec3, Quaternion) {
    let iw = params.inertia.component_mul(&s.w);
    let dw = (tau - s.w.cross(&iw)).component_div(&params.inertia);
    let wq = Quaternion { q0: 0.0, qv: s.w };
    let dq = s.q.hamilton(&wq);
    (
        dw,
        Quaternion {
            q0: 0.5 * dq.q0,
            qv: 0.5 * dq.qv,
        },
    )
}

pub fn mass_deriv(thrust: f64, params: &VehicleParams) -> f64 {
    -thrust / (params.isp * params.g0)
}

fn effective_thrust(m: f64, thrust: f64, params: &VehicleParams) -> f64 {
    if m <= params.dry_mass {
        0.0
    } else {
        thrust
    }
}

pub fn state_deriv(s: &RigidBodyState, inputs: &PlantInputs, params: &VehicleParams) -> StateRate {
    let thrust = effective_thrust(s.m, inputs.thrust, params);
    let a = s.thrust_direction() * (thrust / s.m);
    let (dr, dv) = flat_translational_deriv(s, &a, params);
    let (dw, dq) = rotational_deriv(s, &inputs.torque, params);
    StateRate {
        dr,
        dv,
        dm: mass_deriv(thrust, params),
        dq,
        dw,
    }
}

fn advance(s: &RigidBodyState, k: &StateRate, h: f64) -> RigidBodyState {
    RigidBodyState {
        r: s.r + k.dr * h,
        v: s.v + k.dv * h,
        m: s.m + k.dm * h,
        q: Quaternion {
            q0: s.q.q0 + k.dq.q0 * h,
            qv: s.q.qv + k.dq.qv * h,
        },
        w: s.w + k.dw * h,
    }
}

/// One classical fourth-order Runge–Kutta step over the 14-element state,
/// inputs zero-order held. The quaternion is renormalized afterwards and the
/// mass floored at the dry mass.
pub fn rk4_step(
    s: &RigidBodyState,
    inputs: &PlantInputs,
    dt: f64,
    params: &VehicleParams,
) -> Result<RigidBodyState, DynamicsError> {
    let eval = |x: &RigidBodyState| {
        let k = state_deriv(x, inputs, params);
        if k.is_finite() {
            Ok(k)
        } else {
            Err(DynamicsError::NonFinite)
        }
    };
    let k1 = eval(s)?;
    let k2 = eval(&advance(s, &k1, 0.5 * dt))?;
    let k3 = eval(&advance(s, &k2, 0.5 * dt))?;
    let k4 = eval(&advance(s, &k3, dt))?;
    let h = dt / 6.0;
    let sum = StateRate {
        dr: k1.dr + (k2.dr + k3.dr) * 2.0 + k4.dr,
        dv: k1.dv + (k2.dv + k3.dv) * 2.0 + k4.dv,
        dm: k1.dm + 2.0 * (k2.dm + k3.dm) + k4.dm,
        dq: Quaternion {
            q0: k1.dq.q0 + 2.0 * (k2.dq.q0 + k3.dq.q0) + k4.dq.q0,
            qv: k1.dq.qv + (k2.dq.qv + k3.dq.qv) * 2.0 + k4.dq.qv,
        },
        dw: k1.dw + (k2.dw + k3.dw) * 2.0 + k4.dw,
    };
    let mut next = advance(s, &sum, h);
    next.q = next.q.normalize();
    next.m = next.m.max(params.dry_mass);
    if !next.is_finite() {
        return Err(DynamicsError::NonFinite);
    }
    Ok(next)
}

/// Point-mass state about a spherical, rotating moon.
///
/// `theta` is longitude and `phi` latitude; `u`, `v`, `w` are the tangential
/// (east), across (north) and radial velocity components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalState {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub m: f64,
}

impl SphericalState {
    pub fn altitude(&self) -> f64 {
        self.r - MOON_RADIUS
    }

    fn add_scaled(&self, k: &SphericalState, h: f64) -> SphericalState {
        SphericalState {
            r: self.r + h * k.r,
            theta: self.theta + h * k.theta,
            phi: self.phi + h * k.phi,
            u: self.u + h * k.u,
            v: self.v + h * k.v,
            w: self.w + h * k.w,
            m: self.m + h * k.m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalConsts {
    pub mu: f64,
    pub omega_m: f64,
    pub isp: f64,
    pub g0: f64,
}

impl Default for SphericalConsts {
    fn default() -> Self {
        Self {
            mu: MOON_MU,
            omega_m: MOON_ROTATION_RATE,
            isp: 230.0,
            g0: G0,
        }
    }
}

/// Thrust parameterized by magnitude, declination `beta` and right
/// ascension `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SphericalThrust {
    pub magnitude: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Rates of [`SphericalState`], returned in the same layout.
pub fn spherical_deriv(
    s: &SphericalState,
    thrust: &SphericalThrust,
    consts: &SphericalConsts,
) -> Result<SphericalState, DynamicsError> {
    let (sin_phi, cos_phi) = s.phi.sin_cos();
    if cos_phi.abs() < 1e-9 {
        return Err(DynamicsError::PoleSingularity(cos_phi.abs()));
    }
    let tan_phi = sin_phi / cos_phi;
    let (sa, ca) = thrust.alpha.sin_cos();
    let (sb, cb) = thrust.beta.sin_cos();
    let t_m = thrust.magnitude / s.m;
    let om = consts.omega_m;
    let (r, u, v, w) = (s.r, s.u, s.v, s.w);

    let dw = t_m * sb - consts.mu / (r * r)
        + (u * u + v * v) / r
        + (-2.0 * u * om * cos_phi + r * om * om * cos_phi * cos_phi);
    let du = t_m * ca * cb
        + (-u * w + u * v * tan_phi) / r
        + (-2.0 * w * om * cos_phi + 2.0 * v * om * sin_phi);
    let dv = t_m * sa * cb
        + (-v * w - u * u * tan_phi) / r
        + (-2.0 * u * om * sin_phi - r * om * om * sin_phi * cos_phi);

    let rate = SphericalState {
        r: w,
        theta: u / (r * cos_phi),
        phi: v / r,
        u: du,
        v: dv,
        w: dw,
        m: -thrust.magnitude / (consts.isp * consts.g0),
    };
    Ok(rate)
}

/// Fixed-step RK4 propagation of the spherical model.
pub fn propagate_spherical(
    s: &SphericalState,
    thrust: &SphericalThrust,
    consts: &SphericalConsts,
    dt: f64,
    steps: usize,
) -> Result<SphericalState, DynamicsError> {
    let mut x = *s;
    for _ in 0..steps {
        let k1 = spherical_deriv(&x, thrust, consts)?;
        let k2 = spherical_deriv(&x.add_scaled(&k1, 0.5 * dt), thrust, consts)?;
        let k3 = spherical_deriv(&x.add_scaled(&k2, 0.5 * dt), thrust, consts)?;
        let k4 = spherical_deriv(&x.add_scaled(&k3, dt), thrust, consts)?;
        x = SphericalState {
            r: x.r + dt / 6.0 * (k1.r + 2.0 * (k2.r + k3.r) + k4.r),
            theta: x.theta + dt / 6.0 * (k1.theta + 2.0 * (k2.theta + k3.theta) + k4.theta),
            phi: x.phi + dt / 6.0 * (k1.phi + 2.0 * (k2.phi + k3.phi) + k4.phi),
            u: x.u + dt / 6.0 * (k1.u + 2.0 * (k2.u + k3.u) + k4.u),
            v: x.v + dt / 6.0 * (k1.v + 2.0 * (k2.v + k3.v) + k4.v),
            w: x.w + dt / 6.0 * (k1.w + 2.0 * (k2.w + k3.w) + k4.w),
            m: x.m + dt / 6.0 * (k1.m + 2.0 * (k2.m + k3.m) + k4.m),
        };
        if x.phi.abs() >= 0.5 * PI {
            return Err(DynamicsError::PoleSingularity(x.phi.cos().abs()));
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn hover_state() -> RigidBodyState {
        RigidBodyState::at_rest(Vec3::new(0.0, 800.0, 0.0), 900.0)
    }

    fn propagate(
        mut s: RigidBodyState,
        inputs: &PlantInputs,
        dt: f64,
        steps: usize,
        p: &VehicleParams,
    ) -> RigidBodyState {
        for _ in 0..steps {
            s = rk4_step(&s, inputs, dt, p).unwrap();
        }
        s
    }

    #[test]
    fn translational_cases() {
        let p = VehicleParams::default();
        let s = hover_state();
        let (dr, dv) = flat_translational_deriv(&s, &Vec3::new(0.0, 1.62, 0.0), &p);
        assert_eq!(dr, Vec3::zeros());
        assert_eq!(dv, Vec3::zeros());
        let (_, dv) = flat_translational_deriv(&s, &Vec3::zeros(), &p);
        assert_eq!(dv, Vec3::new(0.0, -1.62, 0.0));
    }

    #[test]
    fn ballistic_fall_matches_closed_form() {
        let p = VehicleParams::default();
        let s = propagate(hover_state(), &PlantInputs::default(), 0.01, 1000, &p);
        assert_abs_diff_eq!(s.r.y - 800.0, -81.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.v.y, -16.2, epsilon = 1e-10);
        assert_eq!(s.m, 900.0);
    }

    #[test]
    fn rotational_cases() {
        let p = VehicleParams::default();
        let s = hover_state();
        let (dw, dq) = rotational_deriv(&s, &Vec3::zeros(), &p);
        assert_eq!(dw, Vec3::zeros());
        assert_eq!(dq.to_array(), [0.0; 4]);
        let spin = RigidBodyState {
            w: Vec3::new(0.0, 1.0, 0.0),
            ..s
        };
        let (dw, _) = rotational_deriv(&spin, &Vec3::zeros(), &p);
        assert_eq!(dw, Vec3::zeros());
    }

    #[test]
    fn torque_free_energy_and_momentum() {
        let p = VehicleParams::default();
        let mut s = hover_state();
        s.w = Vec3::new(0.1, 0.2, 0.05);
        let energy = |s: &RigidBodyState| 0.5 * s.w.dot(&p.inertia.component_mul(&s.w));
        let momentum = |s: &RigidBodyState| s.q.rotate(&p.inertia.component_mul(&s.w));
        let (e0, h0) = (energy(&s), momentum(&s));
        let end = propagate(s, &PlantInputs::default(), 0.01, 1000, &p);
        assert!(((energy(&end) - e0) / e0).abs() < 1e-6);
        assert!((momentum(&end) - h0).norm() / h0.norm() < 1e-6);
        // Body-frame momentum components are not conserved.
        let hb = p.inertia.component_mul(&end.w);
        assert!((hb - p.inertia.component_mul(&s.w)).norm() > 1e-3);
    }

    #[test]
    fn constant_roll_rate_integrates_to_roll_angle() {
        let p = VehicleParams::default();
        let mut s = hover_state();
        s.w = Vec3::new(0.0, 0.3, 0.0);
        let end = propagate(s, &PlantInputs::default(), 0.01, 500, &p);
        assert_abs_diff_eq!(end.q.thrust_roll(), 1.5, epsilon = 1e-9);
    }

    #[test]
    fn mass_flow() {
        let p = VehicleParams::default();
        assert_eq!(mass_deriv(0.0, &p), 0.0);
        assert_abs_diff_eq!(mass_deriv(1458.0, &p), -0.6462, epsilon = 1e-4);
        let burn = PlantInputs {
            thrust: 1458.0,
            torque: Vec3::zeros(),
        };
        let end = propagate(hover_state(), &burn, 0.01, 1000, &p);
        let analytic = 900.0 - 1458.0 * 10.0 / (230.0 * 9.81);
        assert!((end.m - analytic).abs() < 1e-9);
    }

    #[test]
    fn mass_floor_cuts_thrust() {
        let p = VehicleParams::default();
        let mut s = hover_state();
        s.m = 600.0;
        let burn = PlantInputs {
            thrust: 1600.0,
            torque: Vec3::zeros(),
        };
        let end = rk4_step(&s, &burn, 0.01, &p).unwrap();
        assert_eq!(end.m, 600.0);
        assert_abs_diff_eq!(end.v.y, -0.0162, epsilon = 1e-12);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let p = VehicleParams::default();
        let burn = PlantInputs {
            thrust: f64::NAN,
            torque: Vec3::zeros(),
        };
        assert_eq!(
            rk4_step(&hover_state(), &burn, 0.01, &p),
            Err(DynamicsError::NonFinite)
        );
    }

    #[test]
    fn lateral_velocity_conserved_without_thrust() {
        let p = VehicleParams::default();
        let mut s = hover_state();
        s.v = Vec3::new(1.25, 3.0, -0.75);
        s.w = Vec3::new(0.02, 0.1, -0.03);
        let end = propagate(s, &PlantInputs::default(), 0.01, 2000, &p);
        assert_eq!(end.v.x, 1.25);
        assert_eq!(end.v.z, -0.75);
    }

    #[test]
    fn spherical_pure_gravity() {
        let c = SphericalConsts {
            omega_m: 0.0,
            ..Default::default()
        };
        let s = SphericalState {
            r: MOON_RADIUS + 800.0,
            theta: 0.3,
            phi: 0.2,
            u: 0.0,
            v: 0.0,
            w: 0.0,
            m: 900.0,
        };
        let d = spherical_deriv(&s, &SphericalThrust::default(), &c).unwrap();
        assert_eq!(d.u, 0.0);
        assert_eq!(d.v, 0.0);
        assert_eq!(d.w, -c.mu / (s.r * s.r));
        assert_eq!(d.m, 0.0);
    }

    #[test]
    fn spherical_pole_rejected() {
        let s = SphericalState {
            r: MOON_RADIUS,
            theta: 0.0,
            phi: 0.5 * PI,
            u: 0.0,
            v: 0.0,
            w: 0.0,
            m: 900.0,
        };
        assert!(matches!(
            spherical_deriv(&s, &SphericalThrust::default(), &SphericalConsts::default()),
            Err(DynamicsError::PoleSingularity(_))
        ));
    }
}
