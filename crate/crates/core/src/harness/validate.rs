//! Model validation: fly the same profile with the PID autopilot and the
//! throttle NMPC in calm air and compare the responses.

use serde::Serialize;

use super::config::{ControllerKind, ScenarioConfig};
use super::{run_scenario, SimOutput};
use crate::error::Result;
use crate::wind::WindConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub duration: f64,
    pub pid_rms_altitude_error: f64,
    pub nmpc_rms_altitude_error: f64,
    pub pid_rms_airspeed_error: f64,
    pub nmpc_rms_airspeed_error: f64,
    /// RMS and peak of the altitude difference between the two responses.
    pub rms_altitude_difference: f64,
    pub max_altitude_difference: f64,
    pub pid_min_airspeed: f64,
    pub nmpc_min_airspeed: f64,
}

fn calm(controller: ControllerKind) -> Result<ScenarioConfig> {
    Ok(ScenarioConfig {
        wind: WindConfig::disabled(),
        measurement_noise: false,
        ..ScenarioConfig::preset(1, controller)?
    })
}

fn rms(v: impl Iterator<Item = f64>) -> f64 {
    let (n, s) = v.fold((0usize, 0.0), |(n, s), e| (n + 1, s + e * e));
    (s / n.max(1) as f64).sqrt()
}

/// Runs both controllers; `duration` overrides the preset length when given.
pub fn validate_model(duration: Option<f64>) -> Result<(ValidationReport, SimOutput, SimOutput)> {
    let mut pid_cfg = calm(ControllerKind::Pid)?;
    let mut nmpc_cfg = calm(ControllerKind::NmpcThrottle)?;
    if let Some(d) = duration {
        pid_cfg.duration = d;
        nmpc_cfg.duration = d;
    }
    let pid = run_scenario(&pid_cfg)?;
    let nmpc = run_scenario(&nmpc_cfg)?;
    let alt_err = |o: &SimOutput| rms(o.records.iter().map(|r| r.altitude - r.altitude_ref));
    let spd_err = |o: &SimOutput| rms(o.records.iter().map(|r| r.airspeed - r.airspeed_ref));
    let diffs: Vec<f64> = pid
        .records
        .iter()
        .zip(&nmpc.records)
        .map(|(a, b)| a.altitude - b.altitude)
        .collect();
    let report = ValidationReport {
        duration: pid_cfg.duration,
        pid_rms_altitude_error: alt_err(&pid),
        nmpc_rms_altitude_error: alt_err(&nmpc),
        pid_rms_airspeed_error: spd_err(&pid),
        nmpc_rms_airspeed_error: spd_err(&nmpc),
        rms_altitude_difference: rms(diffs.iter().copied()),
        max_altitude_difference: diffs.iter().fold(0.0f64, |m, d| m.max(d.abs())),
        pid_min_airspeed: pid.summary.min_airspeed,
        nmpc_min_airspeed: nmpc.summary.min_airspeed,
    };
    Ok((report, pid, nmpc))
}
