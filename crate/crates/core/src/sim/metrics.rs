use serde::Serialize;

use super::RunRecord;
use crate::control::wrap_angle;

/// Roll is considered settled once it stays within this band of the command.
pub const ROLL_SETTLE_BAND: f64 = 1.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunMetrics {
    /// Distance from the final position to the final phase target, m.
    pub terminal_position_error: f64,
    /// Horizontal distance from the final position to the descent line, m.
    pub terminal_lateral_error: f64,
    pub terminal_altitude: f64,
    pub terminal_speed: f64,
    /// Largest horizontal distance from the descent line after descent start, m.
    pub max_lateral_deviation: f64,
    /// Final `wrap(φ_b − φ_cmd)`, rad.
    pub roll_tracking_error: f64,
    /// Time from roll command to entering and staying within the band, s.
    pub roll_settling_time: Option<f64>,
    pub propellant_used: f64,
}

pub fn compute_metrics(rec: &RunRecord) -> RunMetrics {
    let last = rec.samples.last().expect("record has at least one sample");
    let (n0, e0) = rec.reference_ground_point();
    let lateral = |s: &super::Sample| (s.r.x - n0).hypot(s.r.z - e0);

    let final_target = rec.phases.last().map(|p| p.target_r).unwrap_or(last.r);
    let descent_t = rec.descent_start_t();
    let max_lateral_deviation = rec
        .samples
        .iter()
        .filter(|s| s.t >= descent_t)
        .map(lateral)
        .fold(0.0, f64::max);

    // Last sample outside the band, searching backwards.
    let roll_settling_time = if rec.roll_start_t.is_finite() {
        let outside = rec
            .samples
            .iter()
            .rev()
            .find(|s| wrap_angle(s.phi_b - rec.phi_cmd).abs() > ROLL_SETTLE_BAND);
        match outside {
            None => Some(0.0),
            Some(s) if s.t >= last.t => None,
            Some(s) => {
                let next = rec.samples.iter().find(|x| x.t > s.t).map(|x| x.t).unwrap_or(last.t);
                Some((next - rec.roll_start_t).max(0.0))
            }
        }
    } else {
        None
    };

    RunMetrics {
        terminal_position_error: (last.r - final_target).norm(),
        terminal_lateral_error: lateral(last),
        terminal_altitude: last.r.y,
        terminal_speed: last.v.norm(),
        max_lateral_deviation,
        roll_tracking_error: wrap_angle(last.phi_b - rec.phi_cmd),
        roll_settling_time,
        propellant_used: rec.m0 - last.m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControllerKind;
    use crate::rotation::{Quaternion, Vec3};
    use crate::sim::{PhaseKind, PhaseLog, Sample};

    fn record(offset_east: f64) -> RunRecord {
        let samples = (0..=100)
            .map(|k| {
                let t = k as f64;
                Sample {
                    t,
                    r: Vec3::new(0.0, 800.0 - 5.0 * t, offset_east),
                    v: Vec3::new(0.0, -5.0, 0.0),
                    m: 900.0 - 0.5 * t,
                    q: Quaternion::identity(),
                    w: Vec3::zeros(),
                    thrust: 1000.0,
                    tau: Vec3::zeros(),
                    phi_b: 0.0,
                    phase: 0,
                    a_cmd: Vec3::zeros(),
                }
            })
            .collect();
        RunRecord {
            controller: ControllerKind::Decoupled,
            phi_cmd: 0.0,
            roll_start_t: 0.0,
            m0: 900.0,
            samples,
            phases: vec![PhaseLog {
                kind: PhaseKind::Descent,
                start_t: 0.0,
                end_t: 100.0,
                target_r: Vec3::new(0.0, 300.0, 0.0),
                target_v: Vec3::zeros(),
            }],
            max_abs_tau: Vec3::zeros(),
            tau_limit: Vec3::repeat(50.0),
        }
    }

    #[test]
    fn vertical_record_has_no_lateral_deviation() {
        let m = compute_metrics(&record(0.0));
        assert_eq!(m.max_lateral_deviation, 0.0);
        assert_eq!(m.terminal_lateral_error, 0.0);
        assert_eq!(m.terminal_altitude, 300.0);
        assert_eq!(m.propellant_used, 50.0);
        assert_eq!(m.roll_settling_time, Some(0.0));
    }

    #[test]
    fn constant_offset_is_reported() {
        let m = compute_metrics(&record(3.0));
        assert_eq!(m.max_lateral_deviation, 3.0);
        assert_eq!(m.terminal_lateral_error, 3.0);
        assert_eq!(m.terminal_position_error, 3.0);
    }

    #[test]
    fn roll_settling_time_from_last_excursion() {
        let mut rec = record(0.0);
        rec.phi_cmd = 1.0;
        rec.roll_start_t = 10.0;
        for s in rec.samples.iter_mut() {
            s.phi_b = if s.t < 25.0 { 0.0 } else if s.t < 30.0 { 1.05 } else { 1.005 };
        }
        assert_eq!(compute_metrics(&rec).roll_settling_time, Some(20.0));
        rec.samples.last_mut().unwrap().phi_b = 0.5;
        assert_eq!(compute_metrics(&rec).roll_settling_time, None);
    }
}
