//! Longitudinal point-mass-plus-pitch model of the twin-engine UAV: polynomial
//! aerodynamics, propeller chain, equations of motion and an RK4 integrator.
//!
//! The same model is the simulation plant and the controller's prediction model.

pub mod aero;
pub mod dynamics;
pub mod integrate;
pub mod params;
pub mod propulsion;
pub mod trim;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

pub use aero::{cd_of_alpha, cl_of_alpha, cm_of_alpha, AeroOutputs};
pub use dynamics::{aero_outputs, dynamics, dynamics_jacobian, dynamics_rates, StateDerivative};
pub use integrate::integrate_step;
pub use params::AircraftParams;
pub use propulsion::{advance_ratio, ct_of_j, engine_force_moment, max_thrust, prop_speed_of_throttle};

/// Elevator travel limit, ±30°.
pub const ELEVATOR_LIMIT: f64 = 30.0 * std::f64::consts::PI / 180.0;

/// Physical states. `x_d` is positive down; altitude above the datum is `-x_d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalState {
    pub x_d: f64,
    pub v_n: f64,
    pub v_d: f64,
    pub theta: f64,
    pub q: f64,
}

impl LongitudinalState {
    pub fn airspeed(&self) -> f64 {
        self.v_n.hypot(self.v_d)
    }

    pub fn altitude(&self) -> f64 {
        -self.x_d
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.x_d, self.v_n, self.v_d, self.theta, self.q]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        LongitudinalState {
            x_d: a[0],
            v_n: a[1],
            v_d: a[2],
            theta: a[3],
            q: a[4],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("x_d", self.x_d),
            ("v_n", self.v_n),
            ("v_d", self.v_d),
            ("theta", self.theta),
            ("q", self.q),
        ] {
            ensure_finite(what, v)?;
        }
        Ok(())
    }
}

/// Whether the engine command is a throttle fraction or a thrust force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffortKind {
    Throttle,
    Thrust,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ControlInput {
    Throttle { throttle: f64, elevator: f64 },
    Thrust { thrust: f64, elevator: f64 },
}

impl ControlInput {
    pub fn new(kind: EffortKind, effort: f64, elevator: f64) -> Self {
        match kind {
            EffortKind::Throttle => ControlInput::Throttle {
                throttle: effort,
                elevator,
            },
            EffortKind::Thrust => ControlInput::Thrust {
                thrust: effort,
                elevator,
            },
        }
    }

    pub fn kind(&self) -> EffortKind {
        match self {
            ControlInput::Throttle { .. } => EffortKind::Throttle,
            ControlInput::Thrust { .. } => EffortKind::Thrust,
        }
    }

    /// Throttle fraction or thrust [N].
    pub fn effort(&self) -> f64 {
        match *self {
            ControlInput::Throttle { throttle, .. } => throttle,
            ControlInput::Thrust { thrust, .. } => thrust,
        }
    }

    pub fn elevator(&self) -> f64 {
        match *self {
            ControlInput::Throttle { elevator, .. } | ControlInput::Thrust { elevator, .. } => elevator,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let elevator = ensure_finite("elevator", self.elevator())?;
        let effort = ensure_finite("engine command", self.effort())?;
        if elevator.abs() > ELEVATOR_LIMIT + 1e-12 {
            return Err(Error::OutOfRange {
                what: "elevator",
                value: elevator,
                min: -ELEVATOR_LIMIT,
                max: ELEVATOR_LIMIT,
            });
        }
        if let ControlInput::Throttle { .. } = self {
            if !(0.0..=1.0).contains(&effort) {
                return Err(Error::OutOfRange {
                    what: "throttle",
                    value: effort,
                    min: 0.0,
                    max: 1.0,
                });
            }
        }
        Ok(())
    }
}

/// Wind velocity in the navigation frame [m/s], north and down components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WindVelocity {
    pub north: f64,
    pub down: f64,
}

impl WindVelocity {
    pub const CALM: WindVelocity = WindVelocity { north: 0.0, down: 0.0 };
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_input_limits() {
        assert!(ControlInput::Throttle {
            throttle: 1.2,
            elevator: 0.0
        }
        .validate()
        .is_err());
        assert!(ControlInput::Thrust {
            thrust: 40.0,
            elevator: 0.6
        }
        .validate()
        .is_err());
        assert!(ControlInput::Thrust {
            thrust: 40.0,
            elevator: -0.5
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn airspeed_is_velocity_norm() {
        let s = LongitudinalState {
            x_d: 0.0,
            v_n: 3.0,
            v_d: -4.0,
            theta: 0.0,
            q: 0.0,
        };
        assert_eq!(s.airspeed(), 5.0);
    }
}
