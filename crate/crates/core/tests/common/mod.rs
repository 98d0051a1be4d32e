//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use lander_gnc::guidance::{BoundaryConditions, CubicCoeffs};
use lander_gnc::rotation::{Quaternion, Vec3};
use nalgebra::{Matrix3, Matrix4, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn random_unit_quaternion(rng: &mut impl Rng) -> Quaternion {
    loop {
        let a: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return Quaternion::new(a[0] / n, a[1] / n, a[2] / n, a[3] / n);
        }
    }
}

pub fn random_vec(rng: &mut impl Rng, scale: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

/// The four end constraints of a cubic acceleration profile, written out in
/// physical time: `a(0)`, `a(T)`, `∫a` and `∫∫a`.
fn constraint_matrix(t: f64) -> Matrix4<f64> {
    Matrix4::new(
        1.0, 0.0, 0.0, 0.0,
        1.0, t, t * t, t.powi(3),
        t, t * t / 2.0, t.powi(3) / 3.0, t.powi(4) / 4.0,
        t * t / 2.0, t.powi(3) / 6.0, t.powi(4) / 12.0, t.powi(5) / 20.0,
    )
}

fn constraint_rhs(bc: &BoundaryConditions, axis: usize) -> Vector4<f64> {
    Vector4::new(
        bc.a0[axis],
        bc.af[axis],
        bc.vf[axis] - bc.v0[axis],
        bc.rf[axis] - bc.r0[axis] - bc.v0[axis] * bc.tgo,
    )
}

/// Dense LU solve of the physical-time system, one axis at a time.
pub fn reference_cubic(bc: &BoundaryConditions) -> CubicCoeffs {
    let m = constraint_matrix(bc.tgo);
    let lu = m.full_piv_lu();
    let mut c = [Vec3::zeros(); 4];
    for axis in 0..3 {
        let x = lu.solve(&constraint_rhs(bc, axis)).expect("non-singular constraint matrix");
        for k in 0..4 {
            c[k][axis] = x[k];
        }
    }
    CubicCoeffs {
        c0: c[0],
        c1: c[1],
        c2: c[2],
        c3: c[3],
    }
}

/// Largest constraint residual, each relative to the scale of the terms
/// entering that constraint.
pub fn bvp_relative_residual(bc: &BoundaryConditions, c: &CubicCoeffs) -> f64 {
    let m = constraint_matrix(bc.tgo);
    let mut worst: f64 = 0.0;
    for axis in 0..3 {
        let x = Vector4::new(c.c0[axis], c.c1[axis], c.c2[axis], c.c3[axis]);
        let lhs = m * x;
        let rhs = constraint_rhs(bc, axis);
        for row in 0..4 {
            let terms: f64 = (0..4).map(|k| (m[(row, k)] * x[k]).abs()).sum();
            let scale = terms.max(rhs[row].abs()).max(1e-300);
            worst = worst.max((lhs[row] - rhs[row]).abs() / scale);
        }
    }
    worst
}

/// The 1-3-2 matrix `R(φ, ψ, θ)` exactly as printed (x by φ, then z by ψ,
/// then y by θ).
pub fn dcm_1_3_2(phi: f64, psi: f64, theta: f64) -> Matrix3<f64> {
    let (sf, cf) = phi.sin_cos();
    let (ss, cs) = psi.sin_cos();
    let (st, ct) = theta.sin_cos();
    Matrix3::new(
        ct * cs, ct * ss * cf + st * sf, ct * ss * sf - st * cf,
        -ss, cs * cf, cs * sf,
        st * cs, st * ss * cf - ct * sf, st * ss * sf + ct * cf,
    )
}

/// Factor an attitude matrix into 1-3-2 angles `(φ, ψ, θ)`.
pub fn factor_1_3_2(r: &Matrix3<f64>) -> (f64, f64, f64) {
    let psi = (-r[(1, 0)]).clamp(-1.0, 1.0).asin();
    let phi = r[(1, 2)].atan2(r[(1, 1)]);
    let theta = r[(2, 0)].atan2(r[(0, 0)]);
    (phi, psi, theta)
}

pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * std::f64::consts::PI);
    d.min(2.0 * std::f64::consts::PI - d)
}

/// Unsaturated single-axis PD loop under a position step, stepped exactly
/// for a piecewise-constant torque (double integrator, zero-order hold).
pub fn discrete_pd_step(inertia: f64, kp: f64, kd: f64, e0: f64, dt: f64, steps: usize) -> Vec<(f64, f64)> {
    let (mut e, mut w) = (e0, 0.0);
    let mut out = Vec::with_capacity(steps + 1);
    out.push((e, w));
    for _ in 0..steps {
        let alpha = (-kp * e - kd * w) / inertia;
        e += w * dt + 0.5 * alpha * dt * dt;
        w += alpha * dt;
        out.push((e, w));
    }
    out
}
