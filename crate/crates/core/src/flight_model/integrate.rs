use super::dynamics::dynamics;
use super::{AircraftParams, ControlInput, LongitudinalState, WindVelocity};
use crate::error::{Error, Result};

pub const MAX_STEP: f64 = 0.05;

fn axpy(state: &LongitudinalState, k: [f64; 5], h: f64) -> LongitudinalState {
    let s = state.to_array();
    LongitudinalState::from_array(std::array::from_fn(|i| s[i] + h * k[i]))
}

/// One classical fourth-order Runge-Kutta step with inputs and wind held.
pub fn integrate_step(
    state: &LongitudinalState,
    input: &ControlInput,
    wind: WindVelocity,
    params: &AircraftParams,
    dt: f64,
) -> Result<LongitudinalState> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(Error::OutOfRange {
            what: "dt",
            value: dt,
            min: 0.0,
            max: MAX_STEP,
        });
    }
    let f = |s: &LongitudinalState| dynamics(s, input, wind, params).map(|d| d.to_array());
    let k1 = f(state)?;
    let k2 = f(&axpy(state, k1, 0.5 * dt))?;
    let k3 = f(&axpy(state, k2, 0.5 * dt))?;
    let k4 = f(&axpy(state, k3, dt))?;
    let s = state.to_array();
    Ok(LongitudinalState::from_array(std::array::from_fn(|i| {
        s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    })))
}
