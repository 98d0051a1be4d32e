//! Scenario configuration.
//!
//! The on-disk format is TOML with one table per section and an array of
//! `[[phases]]` tables. Units are SI throughout except angles that carry an
//! explicit `_deg` suffix. Every field except `vehicle.m0` has a default;
//! [`ScenarioConfig::dump`] always writes every field out.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{gains_from_natural_frequency, ControlGains, ControllerKind};
use crate::dynamics::{VehicleParams, G0};
use crate::guidance::PvGains;
use crate::rotation::{Quaternion, Vec3};

pub const NOMINAL_CONFIG: &str = include_str!("../configs/nominal.cfg");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid `{field}`: {constraint}")]
    Validation { field: String, constraint: String },
}

impl ConfigError {
    fn invalid(field: &str, constraint: impl Into<String>) -> Self {
        ConfigError::Validation {
            field: field.to_string(),
            constraint: constraint.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub vehicle: VehicleSection,
    #[serde(default)]
    pub guidance: GuidanceSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub roll: RollSection,
    #[serde(default = "default_phases")]
    pub phases: Vec<PhaseSpec>,
    #[serde(default)]
    pub montecarlo: MonteCarloSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSection {
    /// Initial mass, kg.
    pub m0: f64,
    #[serde(default = "d_dry_mass")]
    pub dry_mass: f64,
    /// Principal inertias (yaw, roll, pitch), kg·m².
    #[serde(default = "d_inertia")]
    pub inertia: Vec3,
    #[serde(default = "d_isp")]
    pub isp: f64,
    #[serde(default = "d_g0")]
    pub g0: f64,
    /// Lunar gravity in the NUE frame, m/s².
    #[serde(default = "d_gravity")]
    pub gravity: Vec3,
    #[serde(default = "d_engine_count")]
    pub engine_count: u32,
    /// Per-engine throttle range, N.
    #[serde(default = "d_engine_min")]
    pub engine_thrust_min: f64,
    #[serde(default = "d_engine_max")]
    pub engine_thrust_max: f64,
    /// Per-axis torque authority, N·m.
    #[serde(default = "d_tau_max")]
    pub tau_max: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthUnit {
    /// Bandwidth is a frequency; `ω_n = 2πf`.
    Hz,
    /// Bandwidth is already `ω_n`.
    RadPerS,
}

impl BandwidthUnit {
    pub fn natural_frequency(&self, bandwidth: f64) -> f64 {
        match self {
            BandwidthUnit::Hz => 2.0 * std::f64::consts::PI * bandwidth,
            BandwidthUnit::RadPerS => bandwidth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialAccel {
    PreviousCommand,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceSection {
    pub bandwidth: f64,
    pub damping: f64,
    pub bandwidth_unit: BandwidthUnit,
    /// Guidance cycle, s.
    pub g_step: f64,
    pub tgo_min: f64,
    /// Source of the initial-acceleration boundary condition at each re-solve.
    pub a0_source: InitialAccel,
    /// Terminal acceleration boundary condition, m/s² (net).
    pub af: Vec3,
}

impl Default for GuidanceSection {
    fn default() -> Self {
        Self {
            bandwidth: 0.06,
            damping: 0.8,
            bandwidth_unit: BandwidthUnit::Hz,
            g_step: 0.1,
            tgo_min: 1.0,
            a0_source: InitialAccel::PreviousCommand,
            af: Vec3::zeros(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateReference {
    Zero,
    /// Finite difference of the reference attitude over one guidance cycle.
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub bandwidth: f64,
    pub damping: f64,
    pub bandwidth_unit: BandwidthUnit,
    pub controller: ControllerKind,
    pub omega_ref: RateReference,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            bandwidth: 0.5,
            damping: 0.8,
            bandwidth_unit: BandwidthUnit::Hz,
            controller: ControllerKind::Decoupled,
            omega_ref: RateReference::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub r: Vec3,
    pub v: Vec3,
    /// Scalar-first attitude quaternion (normalized on load).
    pub q: [f64; 4],
    pub w: Vec3,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            r: Vec3::new(0.0, 800.0, 0.0),
            v: Vec3::zeros(),
            q: [1.0, 0.0, 0.0, 0.0],
            w: Vec3::zeros(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    /// Control and integration step, s.
    pub dt: f64,
    /// Log every n-th control step.
    pub log_decimation: u32,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: 0.01,
            log_decimation: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RollProfile {
    Step,
    Ramp,
}

/// Mission roll command about the thrust axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RollSection {
    pub phi_cmd_deg: f64,
    /// Index into `phases` at whose entry the command is introduced.
    pub start_phase: usize,
    pub profile: RollProfile,
    /// Ramp duration for `profile = "ramp"`, s.
    pub ramp_time: f64,
}

impl Default for RollSection {
    fn default() -> Self {
        Self {
            phi_cmd_deg: 150.0,
            start_phase: 1,
            profile: RollProfile::Step,
            ramp_time: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseSpec {
    /// Position/velocity hold. Without `target_r` the phase holds the
    /// position captured at phase entry.
    Hover {
        duration: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_r: Option<Vec3>,
    },
    /// Cubic-polynomial transfer to `target_r`/`target_v` in `tgo` seconds.
    Descent {
        tgo: f64,
        target_r: Vec3,
        target_v: Vec3,
    },
}

fn default_phases() -> Vec<PhaseSpec> {
    vec![
        PhaseSpec::Hover {
            duration: 12.0,
            target_r: None,
        },
        PhaseSpec::Descent {
            tgo: 130.0,
            target_r: Vec3::new(0.0, 150.0, 0.0),
            target_v: Vec3::zeros(),
        },
        PhaseSpec::Hover {
            duration: 30.0,
            target_r: None,
        },
    ]
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Dispersions {
    /// 1-σ initial mass, kg.
    pub m0_sigma: f64,
    /// 1-σ relative error on each principal inertia.
    pub inertia_sigma_frac: f64,
    /// 1-σ initial position per axis, m.
    pub r0_sigma: f64,
    /// 1-σ initial velocity per axis, m/s.
    pub v0_sigma: f64,
    /// 1-σ initial tilt about each lateral axis, deg.
    pub tilt_sigma_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    pub phi_cmd_grid_deg: Vec<f64>,
    /// Dispersed samples per grid point.
    pub samples: usize,
    pub seed: u64,
    pub controllers: Vec<ControllerKind>,
    #[serde(default)]
    pub dispersions: Dispersions,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        Self {
            phi_cmd_grid_deg: (0..=6).map(|k| 30.0 * k as f64).collect(),
            samples: 1,
            seed: 1,
            controllers: vec![ControllerKind::Coupled, ControllerKind::Decoupled],
            dispersions: Dispersions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub out_dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            out_dir: "out".to_string(),
        }
    }
}

fn d_dry_mass() -> f64 {
    600.0
}
fn d_inertia() -> Vec3 {
    Vec3::new(400.0, 300.0, 450.0)
}
fn d_isp() -> f64 {
    230.0
}
fn d_g0() -> f64 {
    G0
}
fn d_gravity() -> Vec3 {
    Vec3::new(0.0, -1.62, 0.0)
}
fn d_engine_count() -> u32 {
    2
}
fn d_engine_min() -> f64 {
    360.0
}
fn d_engine_max() -> f64 {
    800.0
}
fn d_tau_max() -> Vec3 {
    Vec3::new(50.0, 50.0, 50.0)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn backtick_name(msg: &str, prefix: &str) -> Option<String> {
    let rest = &msg[msg.find(prefix)? + prefix.len()..];
    let end = rest.find('`')?;
    Some(rest[..end].to_string())
}

impl ScenarioConfig {
    /// Table I / Table II vehicle and NGC values with the default scenario.
    /// The bundled nominal scenario (`configs/nominal.cfg`).
    pub fn nominal() -> Self {
        Self::parse(NOMINAL_CONFIG).expect("bundled nominal scenario is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        text.parse::<toml::Table>().map_err(|e| ConfigError::Parse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            reason: e.message().to_string(),
        })?;
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message();
            if let Some(field) = backtick_name(msg, "missing field `") {
                ConfigError::invalid(&field, "required field is missing")
            } else if let Some(field) = backtick_name(msg, "unknown field `") {
                ConfigError::invalid(&field, "unknown key")
            } else {
                ConfigError::Parse {
                    line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
                    reason: msg.to_string(),
                }
            }
        })?;
        cfg.validate()?;
        Ok(cfg.resolved())
    }

    /// Fully explicit serialized form.
    pub fn dump(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    fn resolved(mut self) -> Self {
        let q = Quaternion::from_array(self.initial.q).normalize();
        self.initial.q = q.to_array();
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::invalid(field, format!("must be > 0 (got {x})")))
            }
        };
        let finite_vec = |field: &str, v: &Vec3| {
            if v.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(ConfigError::invalid(field, "components must be finite"))
            }
        };
        let v = &self.vehicle;
        positive("vehicle.m0", v.m0)?;
        positive("vehicle.dry_mass", v.dry_mass)?;
        if v.dry_mass >= v.m0 {
            return Err(ConfigError::invalid("vehicle.dry_mass", "must be below m0"));
        }
        for (i, axis) in ["x", "y", "z"].iter().enumerate() {
            positive(&format!("vehicle.inertia.{axis}"), v.inertia[i])?;
            positive(&format!("vehicle.tau_max.{axis}"), v.tau_max[i])?;
        }
        positive("vehicle.isp", v.isp)?;
        positive("vehicle.g0", v.g0)?;
        finite_vec("vehicle.gravity", &v.gravity)?;
        if v.engine_count == 0 {
            return Err(ConfigError::invalid("vehicle.engine_count", "must be ≥ 1"));
        }
        positive("vehicle.engine_thrust_max", v.engine_thrust_max)?;
        if !(v.engine_thrust_min >= 0.0 && v.engine_thrust_min < v.engine_thrust_max) {
            return Err(ConfigError::invalid(
                "vehicle.engine_thrust_min",
                "must satisfy 0 ≤ min < engine_thrust_max",
            ));
        }

        let g = &self.guidance;
        positive("guidance.bandwidth", g.bandwidth)?;
        positive("guidance.damping", g.damping)?;
        positive("guidance.g_step", g.g_step)?;
        positive("guidance.tgo_min", g.tgo_min)?;
        finite_vec("guidance.af", &g.af)?;

        let c = &self.control;
        positive("control.bandwidth", c.bandwidth)?;
        positive("control.damping", c.damping)?;

        let s = &self.sim;
        positive("sim.dt", s.dt)?;
        if s.dt > 0.02 {
            return Err(ConfigError::invalid("sim.dt", "must be ≤ 0.02 s"));
        }
        let ratio = g.g_step / s.dt;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(ConfigError::invalid(
                "guidance.g_step",
                "must be a positive integer multiple of sim.dt",
            ));
        }
        if s.log_decimation == 0 {
            return Err(ConfigError::invalid("sim.log_decimation", "must be ≥ 1"));
        }

        let i = &self.initial;
        finite_vec("initial.r", &i.r)?;
        finite_vec("initial.v", &i.v)?;
        finite_vec("initial.w", &i.w)?;
        if i.r.y <= 0.0 {
            return Err(ConfigError::invalid("initial.r", "altitude must be positive"));
        }
        let qn = Quaternion::from_array(i.q).norm();
        if !(qn.is_finite() && qn > 1e-6) {
            return Err(ConfigError::invalid("initial.q", "must be a non-zero quaternion"));
        }

        if self.phases.is_empty() {
            return Err(ConfigError::invalid("phases", "at least one phase is required"));
        }
        for (k, p) in self.phases.iter().enumerate() {
            match p {
                PhaseSpec::Hover { duration, target_r } => {
                    positive(&format!("phases[{k}].duration"), *duration)?;
                    if let Some(t) = target_r {
                        finite_vec(&format!("phases[{k}].target_r"), t)?;
                    }
                }
                PhaseSpec::Descent { tgo, target_r, target_v } => {
                    positive(&format!("phases[{k}].tgo"), *tgo)?;
                    if *tgo < g.tgo_min {
                        return Err(ConfigError::invalid(
                            &format!("phases[{k}].tgo"),
                            "must be ≥ guidance.tgo_min",
                        ));
                    }
                    finite_vec(&format!("phases[{k}].target_r"), target_r)?;
                    finite_vec(&format!("phases[{k}].target_v"), target_v)?;
                    if target_r.y <= 0.0 {
                        return Err(ConfigError::invalid(
                            &format!("phases[{k}].target_r"),
                            "target altitude must be positive",
                        ));
                    }
                }
            }
        }

        let r = &self.roll;
        if !r.phi_cmd_deg.is_finite() {
            return Err(ConfigError::invalid("roll.phi_cmd_deg", "must be finite"));
        }
        if r.start_phase >= self.phases.len() {
            return Err(ConfigError::invalid("roll.start_phase", "must index an existing phase"));
        }
        if r.profile == RollProfile::Ramp {
            positive("roll.ramp_time", r.ramp_time)?;
        } else if !(r.ramp_time >= 0.0) {
            return Err(ConfigError::invalid("roll.ramp_time", "must be ≥ 0"));
        }

        let m = &self.montecarlo;
        if m.phi_cmd_grid_deg.is_empty() || m.phi_cmd_grid_deg.iter().any(|x| !x.is_finite()) {
            return Err(ConfigError::invalid("montecarlo.phi_cmd_grid_deg", "must be non-empty and finite"));
        }
        if m.samples == 0 {
            return Err(ConfigError::invalid("montecarlo.samples", "must be ≥ 1"));
        }
        if m.controllers.is_empty() {
            return Err(ConfigError::invalid("montecarlo.controllers", "must list at least one controller"));
        }
        let d = &m.dispersions;
        for (name, x) in [
            ("m0_sigma", d.m0_sigma),
            ("inertia_sigma_frac", d.inertia_sigma_frac),
            ("r0_sigma", d.r0_sigma),
            ("v0_sigma", d.v0_sigma),
            ("tilt_sigma_deg", d.tilt_sigma_deg),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(ConfigError::invalid(&format!("montecarlo.dispersions.{name}"), "must be ≥ 0"));
            }
        }
        if self.output.out_dir.is_empty() {
            return Err(ConfigError::invalid("output.out_dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn vehicle_params(&self) -> VehicleParams {
        let v = &self.vehicle;
        VehicleParams {
            inertia: v.inertia,
            isp: v.isp,
            g0: v.g0,
            gravity: v.gravity,
            thrust_min: v.engine_count as f64 * v.engine_thrust_min,
            thrust_max: v.engine_count as f64 * v.engine_thrust_max,
            tau_max: v.tau_max,
            dry_mass: v.dry_mass,
        }
    }

    pub fn guidance_gains(&self) -> PvGains {
        let g = &self.guidance;
        PvGains::from_natural_frequency(g.bandwidth_unit.natural_frequency(g.bandwidth), g.damping)
    }

    pub fn control_gains(&self) -> ControlGains {
        let c = &self.control;
        gains_from_natural_frequency(
            c.bandwidth_unit.natural_frequency(c.bandwidth),
            c.damping,
            &self.vehicle.inertia,
        )
    }

    pub fn initial_attitude(&self) -> Quaternion {
        Quaternion::from_array(self.initial.q).normalize()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[vehicle]\nm0 = 900.0\n";

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ScenarioConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.vehicle.tau_max, Vec3::repeat(50.0));
        assert_eq!(cfg.initial.q, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(cfg.roll.start_phase, 1);
        assert_eq!(cfg.phases, default_phases());
        let p = cfg.vehicle_params();
        assert_eq!(p.thrust_max, 1600.0);
        assert_eq!(p.thrust_min, 720.0);
    }

    #[test]
    fn nominal_scenario_differs_from_defaults_only_where_documented() {
        let mut cfg = ScenarioConfig::nominal();
        let q = cfg.initial_attitude();
        let t = q.rotate(&crate::rotation::thrust_axis());
        assert!((t.y.acos().to_degrees() - 15.0).abs() < 1e-9);
        assert!(t.x > 0.0 && t.z.abs() < 1e-12);
        cfg.vehicle.tau_max = Vec3::repeat(50.0);
        cfg.initial.q = [1.0, 0.0, 0.0, 0.0];
        cfg.roll.start_phase = 1;
        assert_eq!(cfg, ScenarioConfig::parse(MINIMAL).unwrap());
    }

    #[test]
    fn dump_round_trips() {
        let cfg = ScenarioConfig::nominal();
        let text = cfg.dump();
        assert!(text.contains("dry_mass"));
        assert!(text.contains("kind = \"descent\""));
        let back = ScenarioConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.dump(), text);
    }

    #[test]
    fn missing_m0_is_validation_error() {
        let err = ScenarioConfig::parse("[vehicle]\nisp = 230.0\n").unwrap_err();
        match err {
            ConfigError::Validation { field, .. } => assert_eq!(field, "m0"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_inertia_rejected() {
        let err = ScenarioConfig::parse("[vehicle]\nm0 = 900.0\ninertia = [400.0, -300.0, 450.0]\n").unwrap_err();
        match err {
            ConfigError::Validation { field, .. } => assert_eq!(field, "vehicle.inertia.y"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ScenarioConfig::parse("[vehicle]\nm0 = 900.0\nmass_flow = 1.0\n").unwrap_err();
        assert!(matches!(err, ConfigError::Validation { ref field, .. } if field == "mass_flow"));
        let err = ScenarioConfig::parse("[vehicle]\nm0 = 900.0\n[extras]\nx = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Validation { ref field, .. } if field == "extras"));
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = ScenarioConfig::parse("[vehicle]\nm0 = 900.0\ninertia = [1, 2\n").unwrap_err();
        match err {
            ConfigError::Parse { line, .. } => assert!(line >= 3, "line {line}"),
            other => panic!("unexpected {other:?}"),
        }
        let err = ScenarioConfig::parse("[vehicle]\nm0 = \"heavy\"\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn step_must_divide_guidance_cycle() {
        let err = ScenarioConfig::parse("[vehicle]\nm0 = 900.0\n[sim]\ndt = 0.015\nlog_decimation = 10\n").unwrap_err();
        assert!(matches!(err, ConfigError::Validation { ref field, .. } if field == "guidance.g_step"));
    }

    #[test]
    fn radian_bandwidth_switch() {
        let mut cfg = ScenarioConfig::nominal();
        cfg.control.bandwidth_unit = BandwidthUnit::RadPerS;
        cfg.control.bandwidth = std::f64::consts::PI;
        let hz = ScenarioConfig::nominal().control_gains();
        let rad = cfg.control_gains();
        assert!((hz.kp - rad.kp).amax() < 1e-9);
    }
}
