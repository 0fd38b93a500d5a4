//! Cascaded PID autopilot: height drives a pitch demand, pitch drives the
//! elevator, airspeed drives the throttle. Used to validate the model and as the
//! non-reconfigurable comparison case.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flight_model::trim::published;
use crate::flight_model::{ControlInput, LongitudinalState, ELEVATOR_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Symmetric clamp on the integrator state.
    pub integral_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidGains {
    pub height: LoopGains,
    pub pitch: LoopGains,
    pub speed: LoopGains,
    /// Pitch demand saturation [rad].
    pub pitch_limit: f64,
    /// Time constant of the first-order filter on each derivative term [s].
    pub derivative_tau: f64,
    pub trim_theta: f64,
    pub trim_elevator: f64,
    pub trim_throttle: f64,
}

impl Default for PidGains {
    // Tuned with `cargo run --release --example tune_pid`.
    fn default() -> Self {
        PidGains {
            height: LoopGains {
                kp: 0.04,
                ki: 0.002,
                kd: 0.0,
                integral_limit: 50.0,
            },
            pitch: LoopGains {
                kp: 1.0,
                ki: 0.5,
                kd: 0.2,
                integral_limit: 0.5,
            },
            speed: LoopGains {
                kp: 0.1,
                ki: 0.02,
                kd: 0.0,
                integral_limit: 10.0,
            },
            pitch_limit: 15f64.to_radians(),
            derivative_tau: 0.05,
            trim_theta: published::THETA,
            trim_elevator: published::ELEVATOR,
            trim_throttle: published::THROTTLE,
        }
    }
}

impl PidGains {
    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("height", &self.height), ("pitch", &self.pitch), ("speed", &self.speed)] {
            let ok = [g.kp, g.ki, g.kd].iter().all(|v| v.is_finite())
                && g.integral_limit.is_finite()
                && g.integral_limit >= 0.0;
            if !ok {
                return Err(Error::Config(format!("invalid {name} loop gains")));
            }
        }
        if !(self.pitch_limit > 0.0 && self.derivative_tau >= 0.0) {
            return Err(Error::Config(
                "pitch_limit must be positive and derivative_tau non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LoopState {
    pub integral: f64,
    pub derivative: f64,
    pub last_error: Option<f64>,
}

impl LoopState {
    fn step(&mut self, error: f64, g: &LoopGains, tau: f64, dt: f64) -> f64 {
        self.integral = (self.integral + error * dt).clamp(-g.integral_limit, g.integral_limit);
        let de = self.last_error.map_or(0.0, |e| error - e);
        self.derivative = (tau * self.derivative + de) / (tau + dt);
        self.last_error = Some(error);
        g.kp * error + g.ki * self.integral + g.kd * self.derivative
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidState {
    pub height: LoopState,
    pub pitch: LoopState,
    pub speed: LoopState,
    /// Last pitch demand, for logging.
    pub pitch_demand: f64,
}

/// Altitude and airspeed to hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidReference {
    pub altitude: f64,
    pub airspeed: f64,
}

pub fn pid_step(
    measured: &LongitudinalState,
    reference: PidReference,
    gains: &PidGains,
    state: PidState,
    dt: f64,
) -> Result<(ControlInput, PidState)> {
    if !(dt > 0.0) {
        return Err(Error::OutOfRange {
            what: "dt",
            value: dt,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    let mut s = state;
    let tau = gains.derivative_tau;
    let h_err = reference.altitude - measured.altitude();
    let theta_dem =
        (gains.trim_theta + s.height.step(h_err, &gains.height, tau, dt)).clamp(-gains.pitch_limit, gains.pitch_limit);
    s.pitch_demand = theta_dem;
    let th_err = theta_dem - measured.theta;
    // Trailing-edge-down elevator pitches the nose down.
    let elevator =
        (gains.trim_elevator - s.pitch.step(th_err, &gains.pitch, tau, dt)).clamp(-ELEVATOR_LIMIT, ELEVATOR_LIMIT);
    let v_err = reference.airspeed - measured.airspeed();
    let throttle = (gains.trim_throttle + s.speed.step(v_err, &gains.speed, tau, dt)).clamp(0.0, 1.0);
    Ok((ControlInput::Throttle { throttle, elevator }, s))
}
