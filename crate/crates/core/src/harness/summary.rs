use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::record::{SimRecord, CSV_SCHEMA_VERSION};
use super::reference::{PhaseKind, Reference};
use crate::error::{Error, Result};
use crate::flight_model::{max_thrust, AircraftParams, EffortKind, ELEVATOR_LIMIT};
use crate::nmpc::NmpcConfig;

/// Distance from a V_D limit that counts as touching it [m/s].
pub const TOUCH_MARGIN: f64 = 0.1;

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRms {
    pub kind: PhaseKind,
    pub start: f64,
    pub end: f64,
    pub rms_altitude_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub csv_schema: u32,
    pub scenario: u32,
    pub controller: String,
    pub seed: u64,
    pub samples: usize,
    pub fault_time: Option<f64>,
    pub fault_multiplier: Option<f64>,
    /// First sample with the fault flag set.
    pub detection_time: Option<f64>,
    pub detection_latency: Option<f64>,
    /// Flag raised with no fault active.
    pub false_alarm: bool,
    pub min_airspeed: f64,
    pub reference_cruise_altitude: Option<f64>,
    pub cruise_max_altitude: Option<f64>,
    pub cruise_rms: Option<f64>,
    /// |altitude error| at the end of the final descent.
    pub descent_end_error: Option<f64>,
    pub v_d_limits: [f64; 2],
    /// Samples with V_D outside its limits, over the run and after the fault.
    pub v_d_excursions: usize,
    pub v_d_excursions_post_fault: usize,
    pub v_d_min_post_fault: Option<f64>,
    pub v_d_max_post_fault: Option<f64>,
    /// Separate episodes within `TOUCH_MARGIN` of a V_D limit after the fault.
    pub v_d_touches_post_fault: usize,
    /// Samples where a command breaks an actuator position or rate limit.
    pub control_violations: usize,
    /// Samples after detection where the thrust command exceeds the bound
    /// the solver was given.
    pub bound_exceedances: usize,
    pub solves: usize,
    pub solver_max_iter: usize,
    pub solver_infeasible: usize,
    pub phases: Vec<PhaseRms>,
}

fn rms(errors: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, s) = errors.fold((0usize, 0.0), |(n, s), e| (n + 1, s + e * e));
    (n > 0).then(|| (s / n as f64).sqrt())
}

fn in_window(r: &SimRecord, start: f64, end: f64) -> bool {
    r.t >= start - TOL && r.t <= end + TOL
}

fn control_violations(records: &[SimRecord], nmpc: Option<&NmpcConfig>, params: &AircraftParams) -> usize {
    let mut count = 0;
    for (i, r) in records.iter().enumerate() {
        let mut bad = r.elevator_cmd.abs() > ELEVATOR_LIMIT + TOL;
        match nmpc {
            Some(cfg) => {
                let b = &cfg.bounds;
                let [lo, hi] = b.effort;
                let hi = match cfg.variant {
                    EffortKind::Thrust => {
                        let limit = if r.applied_bound.is_nan() {
                            max_thrust(r.airspeed, params)
                        } else {
                            r.applied_bound
                        };
                        hi.min(limit)
                    }
                    EffortKind::Throttle => hi,
                };
                bad |= r.effort_cmd < lo - TOL || r.effort_cmd > hi + TOL;
                if i > 0 {
                    let prev = &records[i - 1];
                    let p = cfg.control_period;
                    let d_elev = r.elevator_cmd - prev.elevator_cmd;
                    let d_eff = r.effort_cmd - prev.effort_cmd;
                    bad |= d_elev < b.elevator_rate[0] * p - TOL || d_elev > b.elevator_rate[1] * p + TOL;
                    // A command pinned to a bound that just dropped follows the
                    // bound, not the rate limit.
                    let forced = !r.applied_bound.is_nan() && (r.effort_cmd - hi).abs() <= TOL;
                    bad |= d_eff < b.effort_rate[0] * p - TOL && !forced;
                    bad |= d_eff > b.effort_rate[1] * p + TOL;
                }
            }
            None => bad |= !(0.0..=1.0).contains(&r.effort_cmd),
        }
        count += usize::from(bad);
    }
    count
}

pub fn summarize(
    config: &ScenarioConfig,
    reference: &Reference,
    nmpc: Option<&NmpcConfig>,
    records: &[SimRecord],
    params: &AircraftParams,
) -> ScenarioSummary {
    let fault_time = config.fault.map(|f| f.time);
    let detection_time = records.iter().find(|r| r.fault_flag == 1).map(|r| r.t);
    let false_alarm = match (detection_time, fault_time) {
        (Some(d), Some(f)) => d < f,
        (Some(_), None) => true,
        _ => false,
    };
    let detection_latency = match (detection_time, fault_time) {
        (Some(d), Some(f)) if d >= f => Some(d - f),
        _ => None,
    };
    let min_airspeed = records.iter().map(|r| r.airspeed).fold(f64::INFINITY, f64::min);

    let cruise = reference.cruise();
    let cruise_rows = |c: super::Phase| records.iter().filter(move |r| in_window(r, c.start, c.end));
    let cruise_max_altitude = cruise.map(|c| cruise_rows(c).map(|r| r.altitude).fold(f64::NEG_INFINITY, f64::max));
    let cruise_rms = cruise.and_then(|c| rms(cruise_rows(c).map(|r| r.altitude - r.altitude_ref)));
    let covered = |t: f64| records.last().is_some_and(|r| r.t >= t - TOL);
    let descent_end_error = reference.final_descent().filter(|d| covered(d.end)).and_then(|d| {
        records
            .iter()
            .min_by(|a, b| (a.t - d.end).abs().total_cmp(&(b.t - d.end).abs()))
            .map(|r| (r.altitude - r.altitude_ref).abs())
    });

    let v_d_limits = nmpc.map_or([-3.0, 3.0], |c| c.bounds.v_d);
    let outside = |r: &SimRecord| r.v_d < v_d_limits[0] - TOL || r.v_d > v_d_limits[1] + TOL;
    let post: Vec<&SimRecord> = match fault_time {
        Some(f) => records.iter().filter(|r| r.t >= f).collect(),
        None => Vec::new(),
    };
    let mut touches = 0;
    let mut touching = false;
    for r in &post {
        let now = r.v_d <= v_d_limits[0] + TOUCH_MARGIN || r.v_d >= v_d_limits[1] - TOUCH_MARGIN;
        touches += usize::from(now && !touching);
        touching = now;
    }

    let bound_exceedances = match detection_time {
        Some(d) => records
            .iter()
            .filter(|r| r.t >= d && !r.applied_bound.is_nan() && r.effort_cmd > r.applied_bound + TOL)
            .count(),
        None => 0,
    };

    // The status column repeats between solves; count distinct solves.
    let every = nmpc
        .map_or(1, |c| (c.control_period / super::PLANT_DT).round() as usize)
        .max(1);
    let solve_rows: Vec<&SimRecord> = records.iter().step_by(every).filter(|r| r.solver_status >= 0).collect();

    let phases = reference
        .phases()
        .into_iter()
        .filter_map(|p| {
            rms(records
                .iter()
                .filter(|r| in_window(r, p.start, p.end))
                .map(|r| r.altitude - r.altitude_ref))
            .map(|e| PhaseRms {
                kind: p.kind,
                start: p.start,
                end: p.end,
                rms_altitude_error: e,
            })
        })
        .collect();

    ScenarioSummary {
        csv_schema: CSV_SCHEMA_VERSION,
        scenario: config.scenario,
        controller: config.controller.name().to_string(),
        seed: config.seed,
        samples: records.len(),
        fault_time,
        fault_multiplier: config.fault.map(|f| f.multiplier),
        detection_time,
        detection_latency,
        false_alarm,
        min_airspeed,
        reference_cruise_altitude: cruise.map(|c| c.altitude_start),
        cruise_max_altitude,
        cruise_rms,
        descent_end_error,
        v_d_limits,
        v_d_excursions: records.iter().filter(|r| outside(r)).count(),
        v_d_excursions_post_fault: post.iter().filter(|r| outside(r)).count(),
        v_d_min_post_fault: post.iter().map(|r| r.v_d).reduce(f64::min),
        v_d_max_post_fault: post.iter().map(|r| r.v_d).reduce(f64::max),
        v_d_touches_post_fault: touches,
        control_violations: control_violations(records, nmpc, params),
        bound_exceedances,
        solves: solve_rows.len(),
        solver_max_iter: solve_rows.iter().filter(|r| r.solver_status == 1).count(),
        solver_infeasible: solve_rows.iter().filter(|r| r.solver_status == 2).count(),
        phases,
    }
}

/// Key-value text (TOML) summary of a run.
pub fn write_summary(summary: &ScenarioSummary, path: &Path) -> Result<()> {
    let text = toml::to_string(summary).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

impl ScenarioSummary {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}
