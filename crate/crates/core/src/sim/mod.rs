//! Closed-loop scenario execution.
//!
//! Each control step runs: guidance (re-solved every guidance cycle and held
//! in between) → thrust magnitude and reference attitude → the selected
//! attitude controller → one RK4 step of the plant.

mod metrics;
mod montecarlo;

pub use metrics::{compute_metrics, RunMetrics, ROLL_SETTLE_BAND};
pub use montecarlo::{aggregate, disperse, run_monte_carlo, Aggregate, MonteCarloRow, MonteCarloSpec, MonteCarloSummary};

use thiserror::Error;

use crate::config::{InitialAccel, PhaseSpec, RateReference, RollProfile, ScenarioConfig};
use crate::control::{
    coupled_pd_torque, decoupled_errors, decoupled_pd_torque, ControlGains, ControllerKind,
};
use crate::dynamics::{rk4_step, DynamicsError, PlantInputs, RigidBodyState, VehicleParams};
use crate::guidance::{
    eval_guidance_accel, hover_pv_accel, solve_cubic_coeffs, tgo_update, BoundaryConditions,
    GuidanceCommand, GuidanceError, PvGains,
};
use crate::rotation::{Quaternion, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("simulation aborted at t = {t:.2} s: {reason}")]
    Aborted { reason: String, t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    Hover,
    Descent,
}

/// A phase as it actually executed.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseLog {
    pub kind: PhaseKind,
    pub start_t: f64,
    pub end_t: f64,
    pub target_r: Vec3,
    pub target_v: Vec3,
}

/// One logged sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub r: Vec3,
    pub v: Vec3,
    pub m: f64,
    pub q: Quaternion,
    pub w: Vec3,
    pub thrust: f64,
    pub tau: Vec3,
    pub phi_b: f64,
    pub phase: usize,
    /// Net commanded acceleration.
    pub a_cmd: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub controller: ControllerKind,
    /// Final roll command, rad.
    pub phi_cmd: f64,
    /// Time the roll command was introduced.
    pub roll_start_t: f64,
    pub m0: f64,
    pub samples: Vec<Sample>,
    pub phases: Vec<PhaseLog>,
    /// Largest |τ_i| applied over every control step.
    pub max_abs_tau: Vec3,
    pub tau_limit: Vec3,
}

impl RunRecord {
    /// Ground point of the planned vertical line: the first descent target,
    /// or the first phase target when there is no descent.
    pub fn reference_ground_point(&self) -> (f64, f64) {
        let p = self
            .phases
            .iter()
            .find(|p| p.kind == PhaseKind::Descent)
            .or(self.phases.first())
            .map(|p| p.target_r)
            .unwrap_or_else(Vec3::zeros);
        (p.x, p.z)
    }

    pub fn descent_start_t(&self) -> f64 {
        self.phases
            .iter()
            .find(|p| p.kind == PhaseKind::Descent)
            .map(|p| p.start_t)
            .unwrap_or(0.0)
    }
}

struct Runtime {
    params: VehicleParams,
    pv: PvGains,
    gains: ControlGains,
    dt: f64,
    guidance_every: u64,
    g_step: f64,
    tgo_min: f64,
    af: Vec3,
    a0_source: InitialAccel,
    omega_ref: RateReference,
    phi_cmd: f64,
    roll_start_phase: usize,
    roll_profile: RollProfile,
    ramp_time: f64,
    log_every: u64,
}

impl Runtime {
    fn new(cfg: &ScenarioConfig) -> Self {
        let dt = cfg.sim.dt;
        Self {
            params: cfg.vehicle_params(),
            pv: cfg.guidance_gains(),
            gains: cfg.control_gains(),
            dt,
            guidance_every: (cfg.guidance.g_step / dt).round() as u64,
            g_step: cfg.guidance.g_step,
            tgo_min: cfg.guidance.tgo_min,
            af: cfg.guidance.af,
            a0_source: cfg.guidance.a0_source,
            omega_ref: cfg.control.omega_ref,
            phi_cmd: cfg.roll.phi_cmd_deg.to_radians(),
            roll_start_phase: cfg.roll.start_phase,
            roll_profile: cfg.roll.profile,
            ramp_time: cfg.roll.ramp_time,
            log_every: cfg.sim.log_decimation as u64,
        }
    }

    fn roll_command(&self, roll_start: Option<f64>, t: f64) -> f64 {
        match (roll_start, self.roll_profile) {
            (None, _) => 0.0,
            (Some(_), RollProfile::Step) => self.phi_cmd,
            (Some(t0), RollProfile::Ramp) => self.phi_cmd * ((t - t0) / self.ramp_time).clamp(0.0, 1.0),
        }
    }
}

struct ActivePhase {
    index: usize,
    kind: PhaseKind,
    start_t: f64,
    start_step: u64,
    duration: f64,
    tgo: f64,
    target_r: Vec3,
    target_v: Vec3,
}

impl ActivePhase {
    fn enter(index: usize, spec: &PhaseSpec, state: &RigidBodyState, t: f64, step: u64) -> Self {
        match spec {
            PhaseSpec::Hover { duration, target_r } => Self {
                index,
                kind: PhaseKind::Hover,
                start_t: t,
                start_step: step,
                duration: *duration,
                tgo: 0.0,
                target_r: target_r.unwrap_or(state.r),
                target_v: Vec3::zeros(),
            },
            PhaseSpec::Descent { tgo, target_r, target_v } => Self {
                index,
                kind: PhaseKind::Descent,
                start_t: t,
                start_step: step,
                duration: *tgo,
                tgo: *tgo,
                target_r: *target_r,
                target_v: *target_v,
            },
        }
    }

    fn finished(&self, state: &RigidBodyState, step: u64, dt: f64, tgo_min: f64) -> bool {
        match self.kind {
            PhaseKind::Hover => {
                let elapsed = (step - self.start_step) as f64 * dt;
                elapsed >= self.duration - 1e-9
            }
            PhaseKind::Descent => self.tgo <= tgo_min || state.r.y <= self.target_r.y,
        }
    }

    fn log(&self, end_t: f64) -> PhaseLog {
        PhaseLog {
            kind: self.kind,
            start_t: self.start_t,
            end_t,
            target_r: self.target_r,
            target_v: self.target_v,
        }
    }
}

fn initial_state(cfg: &ScenarioConfig) -> RigidBodyState {
    RigidBodyState {
        r: cfg.initial.r,
        v: cfg.initial.v,
        m: cfg.vehicle.m0,
        q: cfg.initial_attitude(),
        w: cfg.initial.w,
    }
}

fn abort(reason: impl Into<String>, t: f64) -> SimError {
    SimError::Aborted {
        reason: reason.into(),
        t,
    }
}

/// Execute the configured phase sequence with the given attitude controller.
pub fn run_scenario(cfg: &ScenarioConfig, controller: ControllerKind) -> Result<RunRecord, SimError> {
    let rt = Runtime::new(cfg);
    let mut state = initial_state(cfg);
    let mut step: u64 = 0;
    let mut samples = Vec::new();
    let mut phase_logs = Vec::new();
    let mut max_abs_tau = Vec3::zeros();
    let mut roll_start: Option<f64> = None;

    let mut a_prev = Vec3::zeros();
    let mut cmd = GuidanceCommand::from_net_accel(a_prev, &state, &rt.params, 0.0, &state.q);
    let mut q_ref_prev: Option<Quaternion> = None;
    let mut w_ref = Vec3::zeros();

    let mut phase = ActivePhase::enter(0, &cfg.phases[0], &state, 0.0, 0);
    loop {
        let t = step as f64 * rt.dt;

        if (step - phase.start_step).is_multiple_of(rt.guidance_every) {
            if roll_start.is_none() && phase.index >= rt.roll_start_phase {
                roll_start = Some(t);
            }
            let a_net = match phase.kind {
                PhaseKind::Hover => hover_pv_accel(&phase.target_r, &phase.target_v, &state.r, &state.v, &rt.pv),
                PhaseKind::Descent => {
                    let bc = BoundaryConditions {
                        r0: state.r,
                        v0: state.v,
                        a0: match rt.a0_source {
                            InitialAccel::PreviousCommand => a_prev,
                            InitialAccel::Zero => Vec3::zeros(),
                        },
                        rf: phase.target_r,
                        vf: phase.target_v,
                        af: rt.af,
                        tgo: phase.tgo,
                    };
                    let coeffs = solve_cubic_coeffs(&bc, rt.tgo_min).map_err(|e: GuidanceError| abort(e.to_string(), t))?;
                    eval_guidance_accel(&coeffs, rt.g_step)
                }
            };
            a_prev = a_net;
            let phi_cmd = rt.roll_command(roll_start, t);
            cmd = GuidanceCommand::from_net_accel(a_net, &state, &rt.params, phi_cmd, &cmd.q_guid);
            if rt.omega_ref == RateReference::FiniteDifference {
                if let Some(prev) = q_ref_prev {
                    let dq = (prev.inverse() * cmd.q_ref).canonical();
                    w_ref = dq.qv * (2.0 / rt.g_step);
                }
                q_ref_prev = Some(cmd.q_ref);
            }
        }

        let out = match controller {
            ControllerKind::Coupled => coupled_pd_torque(&cmd.q_ref, &state, &w_ref, &rt.gains, &rt.params),
            ControllerKind::Decoupled => {
                let errs = decoupled_errors(&cmd.q_guid, &state.q, cmd.phi_cmd, &state.w, &w_ref);
                decoupled_pd_torque(&errs, &state, &rt.gains, &rt.params)
            }
        };
        max_abs_tau = max_abs_tau.zip_map(&out.tau, |m, x| m.max(x.abs()));

        let sample = Sample {
            t,
            r: state.r,
            v: state.v,
            m: state.m,
            q: state.q,
            w: state.w,
            thrust: cmd.thrust,
            tau: out.tau,
            phi_b: state.q.thrust_roll(),
            phase: phase.index,
            a_cmd: cmd.a_net,
        };
        if step.is_multiple_of(rt.log_every) {
            samples.push(sample);
        }

        let inputs = PlantInputs {
            thrust: cmd.thrust,
            torque: out.tau,
        };
        state = rk4_step(&state, &inputs, rt.dt, &rt.params).map_err(|e: DynamicsError| abort(e.to_string(), t))?;
        step += 1;
        let t_next = step as f64 * rt.dt;
        if phase.kind == PhaseKind::Descent {
            phase.tgo = tgo_update(phase.tgo, rt.dt, rt.tgo_min);
        }
        if state.r.y < 0.0 {
            return Err(abort("ground impact", t_next));
        }

        if phase.finished(&state, step, rt.dt, rt.tgo_min) {
            phase_logs.push(phase.log(t_next));
            let next = phase.index + 1;
            if next == cfg.phases.len() {
                if samples.last().map(|s| s.t) != Some(t_next) {
                    samples.push(Sample {
                        t: t_next,
                        r: state.r,
                        v: state.v,
                        m: state.m,
                        q: state.q,
                        w: state.w,
                        phi_b: state.q.thrust_roll(),
                        ..sample
                    });
                }
                break;
            }
            phase = ActivePhase::enter(next, &cfg.phases[next], &state, t_next, step);
        }
    }

    Ok(RunRecord {
        controller,
        phi_cmd: rt.phi_cmd,
        roll_start_t: roll_start.unwrap_or(f64::INFINITY),
        m0: cfg.vehicle.m0,
        samples,
        phases: phase_logs,
        max_abs_tau,
        tau_limit: rt.params.tau_max,
    })
}
