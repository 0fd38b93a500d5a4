//! Equilibrium flight conditions.

use super::dynamics::{dynamics_jacobian, dynamics_rates};
use super::{AircraftParams, ControlInput, EffortKind, LongitudinalState};
use crate::error::{Error, Result};

/// Published 20 m/s trim point of the aircraft.
pub mod published {
    pub const AIRSPEED: f64 = 20.0;
    pub const THETA: f64 = -0.0040;
    pub const ELEVATOR: f64 = -0.0603;
    pub const THROTTLE: f64 = 0.7281;
    pub const THRUST: f64 = 27.7426;
}

/// Reference altitude used when a trim state needs a position.
pub const TRIM_X_D: f64 = -100.0;

/// State at the published trim point: 20 m/s, θ = -0.0040 rad, q = 0, with
/// the flight-path angle chosen so the vertical acceleration vanishes under
/// the published thrust and elevator.
pub fn published_trim(params: &AircraftParams) -> LongitudinalState {
    let v = published::AIRSPEED;
    let vertical_accel = |gamma: f64| {
        let point = [
            v * gamma.cos(),
            -v * gamma.sin(),
            published::THETA,
            0.0,
            published::THRUST,
            published::ELEVATOR,
        ];
        dynamics_rates(point, EffortKind::Thrust, params)[2]
    };
    // a_D increases with gamma (less lift as alpha = theta - gamma falls).
    let (mut lo, mut hi) = (-0.1, 0.1);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if vertical_accel(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let gamma = 0.5 * (lo + hi);
    LongitudinalState {
        x_d: TRIM_X_D,
        v_n: v * gamma.cos(),
        v_d: -v * gamma.sin(),
        theta: published::THETA,
        q: 0.0,
    }
}

/// Vertical engine offset that zeroes the pitch acceleration at the
/// published trim point: `r_z = -M_aero / T`.
pub fn engine_offset_for_trim(params: &AircraftParams) -> f64 {
    let s = published_trim(params);
    let no_engines = AircraftParams {
        engine_positions: [[0.0; 3]; 2],
        ..params.clone()
    };
    let point = [s.v_n, s.v_d, s.theta, s.q, published::THRUST, published::ELEVATOR];
    let q_dot = dynamics_rates(point, EffortKind::Thrust, &no_engines)[4];
    -q_dot * params.inertia_yy / published::THRUST
}

/// Exact equilibrium for a given airspeed and flight-path angle (positive climbing).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trim {
    pub state: LongitudinalState,
    pub kind: EffortKind,
    pub effort: f64,
    pub elevator: f64,
}

impl Trim {
    pub fn input(&self) -> ControlInput {
        ControlInput::new(self.kind, self.effort, self.elevator)
    }
}

/// Newton solve of `[a_N, a_D, q̇] = 0` for pitch attitude, engine command and elevator.
pub fn solve_trim(
    airspeed: f64,
    flight_path_angle: f64,
    kind: EffortKind,
    x_d: f64,
    params: &AircraftParams,
) -> Result<Trim> {
    let v_n = airspeed * flight_path_angle.cos();
    let v_d = -airspeed * flight_path_angle.sin();
    let mut unknowns = [
        published::THETA + flight_path_angle,
        match kind {
            EffortKind::Thrust => published::THRUST,
            EffortKind::Throttle => published::THROTTLE,
        },
        published::ELEVATOR,
    ];
    for _ in 0..50 {
        let point = [v_n, v_d, unknowns[0], 0.0, unknowns[1], unknowns[2]];
        let (rates, jac) = dynamics_jacobian(point, kind, params);
        let residual = nalgebra::Vector3::new(rates[1], rates[2], rates[4]);
        if residual.amax() < 1e-12 {
            let state = LongitudinalState {
                x_d,
                v_n,
                v_d,
                theta: unknowns[0],
                q: 0.0,
            };
            return Ok(Trim {
                state,
                kind,
                effort: unknowns[1],
                elevator: unknowns[2],
            });
        }
        let cols = [2, 4, 5];
        let m = nalgebra::Matrix3::from_fn(|r, c| jac[[1, 2, 4][r]][cols[c]]);
        let step = m.lu().solve(&residual).ok_or(Error::Singular("trim Jacobian"))?;
        for i in 0..3 {
            unknowns[i] -= step[i];
        }
    }
    Err(Error::ModelValidity(format!(
        "no trim found at {airspeed} m/s, flight path {flight_path_angle} rad"
    )))
}
