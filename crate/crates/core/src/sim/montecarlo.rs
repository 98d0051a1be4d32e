//! Roll-command sweeps with optional initial-condition dispersions.
//!
//! Samples are independent runs executed in parallel. Each sample draws its
//! dispersions from a generator seeded by `(seed, grid index, sample index)`
//! only, so every controller sees the same dispersed vehicle and results do
//! not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use super::{compute_metrics, run_scenario, RunMetrics, SimError};
use crate::config::{Dispersions, ScenarioConfig};
use crate::control::ControllerKind;
use crate::rotation::{Quaternion, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSpec {
    pub phi_cmd_grid_deg: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub controllers: Vec<ControllerKind>,
    pub dispersions: Dispersions,
}

impl MonteCarloSpec {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        let m = &cfg.montecarlo;
        Self {
            phi_cmd_grid_deg: m.phi_cmd_grid_deg.clone(),
            samples: m.samples,
            seed: m.seed,
            controllers: m.controllers.clone(),
            dispersions: m.dispersions.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloRow {
    pub phi_cmd_deg: f64,
    pub sample: usize,
    pub controller: ControllerKind,
    /// Abort reason when the run did not complete.
    pub aborted: Option<String>,
    pub metrics: Option<RunMetrics>,
}

/// Statistics of the terminal lateral error for one grid point and controller.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub phi_cmd_deg: f64,
    pub controller: ControllerKind,
    pub runs: usize,
    pub aborted: usize,
    pub mean_terminal_lateral_error: f64,
    pub max_terminal_lateral_error: f64,
    pub p95_terminal_lateral_error: f64,
    pub mean_max_lateral_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub seed: u64,
    pub rows: Vec<MonteCarloRow>,
    pub aggregates: Vec<Aggregate>,
}

fn sample_seed(seed: u64, grid: usize, sample: usize) -> u64 {
    // splitmix64 finalizer over the combined index
    let mut z = seed
        .wrapping_add((grid as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((sample as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Apply one draw of the dispersions to a copy of the configuration.
pub fn disperse(cfg: &ScenarioConfig, d: &Dispersions, seed: u64) -> ScenarioConfig {
    let mut out = cfg.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut draw = |sigma: f64| {
        let x: f64 = std.sample(&mut rng);
        sigma * x
    };
    // Draw every variate unconditionally so that enabling one dispersion
    // does not shift the others.
    let dm = draw(d.m0_sigma);
    let di = Vec3::new(draw(d.inertia_sigma_frac), draw(d.inertia_sigma_frac), draw(d.inertia_sigma_frac));
    let dr = Vec3::new(draw(d.r0_sigma), draw(d.r0_sigma), draw(d.r0_sigma));
    let dv = Vec3::new(draw(d.v0_sigma), draw(d.v0_sigma), draw(d.v0_sigma));
    let tilt_sigma = d.tilt_sigma_deg.to_radians();
    let tilt = Vec3::new(draw(tilt_sigma), 0.0, draw(tilt_sigma));

    out.vehicle.m0 = (cfg.vehicle.m0 + dm).max(cfg.vehicle.dry_mass + 1.0);
    out.vehicle.inertia = cfg.vehicle.inertia.zip_map(&di, |i, e| i * (1.0 + e).max(0.1));
    out.initial.r = cfg.initial.r + dr;
    out.initial.v = cfg.initial.v + dv;
    if tilt.norm() > 0.0 {
        let q0 = cfg.initial_attitude();
        let dq = Quaternion::from_axis_angle(&tilt, tilt.norm()).expect("non-zero tilt");
        out.initial.q = (dq * q0).to_array();
    }
    out
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Per-(grid point, controller) statistics over `rows`, in grid order.
pub fn aggregate(rows: &[MonteCarloRow], spec: &MonteCarloSpec) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for &phi in &spec.phi_cmd_grid_deg {
        for &controller in &spec.controllers {
            let group: Vec<&MonteCarloRow> = rows
                .iter()
                .filter(|r| r.phi_cmd_deg == phi && r.controller == controller)
                .collect();
            let mut terminal: Vec<f64> = group
                .iter()
                .filter_map(|r| r.metrics.map(|m| m.terminal_lateral_error))
                .collect();
            let mut deviation: Vec<f64> = group
                .iter()
                .filter_map(|r| r.metrics.map(|m| m.max_lateral_deviation))
                .collect();
            // Sorting first makes the sums independent of sample order.
            terminal.sort_by(f64::total_cmp);
            deviation.sort_by(f64::total_cmp);
            let mean = |v: &[f64]| {
                if v.is_empty() {
                    f64::NAN
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            };
            out.push(Aggregate {
                phi_cmd_deg: phi,
                controller,
                runs: group.len(),
                aborted: group.iter().filter(|r| r.aborted.is_some()).count(),
                mean_terminal_lateral_error: mean(&terminal),
                max_terminal_lateral_error: terminal.last().copied().unwrap_or(f64::NAN),
                p95_terminal_lateral_error: percentile(&terminal, 95.0),
                mean_max_lateral_deviation: mean(&deviation),
            });
        }
    }
    out
}

/// Run every (grid point, sample, controller) combination. Aborted runs are
/// reported as flagged rows.
pub fn run_monte_carlo(spec: &MonteCarloSpec, cfg: &ScenarioConfig) -> MonteCarloSummary {
    let jobs: Vec<(usize, usize, ControllerKind)> = (0..spec.phi_cmd_grid_deg.len())
        .flat_map(|g| {
            (0..spec.samples).flat_map(move |s| spec.controllers.iter().map(move |&c| (g, s, c)))
        })
        .collect();
    let rows: Vec<MonteCarloRow> = jobs
        .par_iter()
        .map(|&(g, s, controller)| {
            let phi = spec.phi_cmd_grid_deg[g];
            let mut run_cfg = disperse(cfg, &spec.dispersions, sample_seed(spec.seed, g, s));
            run_cfg.roll.phi_cmd_deg = phi;
            let (aborted, metrics) = match run_scenario(&run_cfg, controller) {
                Ok(rec) => (None, Some(compute_metrics(&rec))),
                Err(SimError::Aborted { reason, t }) => (Some(format!("{reason} at t = {t:.2} s")), None),
            };
            MonteCarloRow {
                phi_cmd_deg: phi,
                sample: s,
                controller,
                aborted,
                metrics,
            }
        })
        .collect();
    let aggregates = aggregate(&rows, spec);
    MonteCarloSummary {
        seed: spec.seed,
        rows,
        aggregates,
    }
}
