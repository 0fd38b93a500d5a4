//! Longitudinal equations of motion in the north-down navigation frame.

use num_dual::{DualNum, DualSVec64};

use super::aero::{body_axis_coefficients, horner, AeroOutputs, CD_COEFFS, CL_COEFFS, CM_COEFFS};
use super::params::AircraftParams;
use super::propulsion::thrust_of_throttle;
use super::{ControlInput, EffortKind, LongitudinalState, WindVelocity};
use crate::error::{Error, Result};

/// Below this airspeed angle of attack is not defined.
pub const MIN_AIRSPEED: f64 = 0.1;

/// Time derivative of [`LongitudinalState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub x_d: f64,
    pub v_n: f64,
    pub v_d: f64,
    pub theta: f64,
    pub q: f64,
}

impl StateDerivative {
    pub fn to_array(self) -> [f64; 5] {
        [self.x_d, self.v_n, self.v_d, self.theta, self.q]
    }

    pub fn max_abs(self) -> f64 {
        self.to_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Intermediate quantities of one evaluation, generic so the same code path
/// yields values and forward-mode derivatives.
pub(crate) struct Evaluation<T> {
    pub cl: T,
    pub cd: T,
    pub cm: T,
    pub cx: T,
    pub cz: T,
    pub fx: T,
    pub fz: T,
    pub pitching_moment: T,
    pub rates: [T; 5],
}

/// Core model. `effort` is throttle or thrust according to `kind`; velocities
/// are inertial and the wind is subtracted to obtain air-relative motion.
#[allow(clippy::too_many_arguments)]
pub(crate) fn evaluate<T: DualNum<Primitive = f64> + Copy>(
    v_n: T,
    v_d: T,
    theta: T,
    q: T,
    effort: T,
    kind: EffortKind,
    elevator: T,
    wind: WindVelocity,
    p: &AircraftParams,
) -> Evaluation<T> {
    let vn_air = v_n - wind.north;
    let vd_air = v_d - wind.down;
    let (st, ct) = theta.sin_cos();
    let u = vn_air * ct - vd_air * st;
    let w = vn_air * st + vd_air * ct;
    let airspeed = (vn_air * vn_air + vd_air * vd_air).sqrt();
    let alpha = w.atan2(u);
    let qbar = airspeed * airspeed * (0.5 * p.air_density);
    let rate_scale = q * p.chord / (airspeed * 2.0);

    let cl = horner(&CL_COEFFS, alpha) + elevator * p.cl_de + rate_scale * p.cl_q;
    let cd = horner(&CD_COEFFS, alpha);
    let cm = horner(&CM_COEFFS, alpha) + elevator * p.cm_de + rate_scale * p.cm_q;
    let (cx, cz) = body_axis_coefficients(cl, cd, alpha);
    let fx = qbar * cx * p.wing_area;
    let fz = qbar * cz * p.wing_area;
    let pitching_moment = qbar * cm * (p.wing_area * p.chord);

    let thrust = match kind {
        EffortKind::Throttle => thrust_of_throttle(effort, airspeed, p),
        EffortKind::Thrust => effort,
    };
    let engine_pitch = thrust * p.engine_pitch_arm();

    let a_x = (fx + thrust) / p.mass;
    let a_z = fz / p.mass;
    let a_n = a_x * ct + a_z * st;
    let a_d = -(a_x * st) + a_z * ct + p.gravity;
    let q_dot = (pitching_moment + engine_pitch) / p.inertia_yy;

    Evaluation {
        cl,
        cd,
        cm,
        cx,
        cz,
        fx,
        fz,
        pitching_moment,
        rates: [v_d, a_n, a_d, q, q_dot],
    }
}

fn check_inputs(state: &LongitudinalState, input: &ControlInput, wind: WindVelocity) -> Result<()> {
    state.validate()?;
    input.validate()?;
    let vn_air = state.v_n - wind.north;
    let vd_air = state.v_d - wind.down;
    let airspeed = vn_air.hypot(vd_air);
    if !(airspeed > MIN_AIRSPEED) {
        return Err(Error::ModelValidity(format!(
            "airspeed {airspeed:.4} m/s below {MIN_AIRSPEED} m/s"
        )));
    }
    let u = vn_air * state.theta.cos() - vd_air * state.theta.sin();
    if u <= 0.0 {
        return Err(Error::ModelValidity(format!("reverse body-axis flow (u = {u:.4} m/s)")));
    }
    Ok(())
}

/// State derivative of the longitudinal model.
pub fn dynamics(
    state: &LongitudinalState,
    input: &ControlInput,
    wind: WindVelocity,
    params: &AircraftParams,
) -> Result<StateDerivative> {
    check_inputs(state, input, wind)?;
    let e = evaluate(
        state.v_n,
        state.v_d,
        state.theta,
        state.q,
        input.effort(),
        input.kind(),
        input.elevator(),
        wind,
        params,
    );
    let [x_d, v_n, v_d, theta, q] = e.rates;
    Ok(StateDerivative {
        x_d,
        v_n,
        v_d,
        theta,
        q,
    })
}

/// Aerodynamic coefficients and loads at the given condition.
pub fn aero_outputs(
    state: &LongitudinalState,
    input: &ControlInput,
    wind: WindVelocity,
    params: &AircraftParams,
) -> Result<AeroOutputs> {
    check_inputs(state, input, wind)?;
    let e = evaluate(
        state.v_n,
        state.v_d,
        state.theta,
        state.q,
        input.effort(),
        input.kind(),
        input.elevator(),
        wind,
        params,
    );
    Ok(AeroOutputs {
        cl: e.cl,
        cd: e.cd,
        cm: e.cm,
        cx: e.cx,
        cz: e.cz,
        fx: e.fx,
        fz: e.fz,
        pitching_moment: e.pitching_moment,
    })
}

/// Thrust delivered by the engines for this input and airspeed.
pub fn delivered_thrust(input: &ControlInput, airspeed: f64, params: &AircraftParams) -> f64 {
    match *input {
        ControlInput::Thrust { thrust, .. } => thrust,
        ControlInput::Throttle { throttle, .. } => thrust_of_throttle(throttle, airspeed, params),
    }
}

/// Rates and their Jacobian with respect to
/// `[v_n, v_d, theta, q, effort, elevator]`, for the wind-free prediction model.
/// Row order follows `[x_d, v_n, v_d, theta, q]` rates.
pub fn dynamics_jacobian(point: [f64; 6], kind: EffortKind, params: &AircraftParams) -> ([f64; 5], [[f64; 6]; 5]) {
    let v: [DualSVec64<6>; 6] = std::array::from_fn(|i| DualSVec64::from_re(point[i]).derivative(i));
    let e = evaluate(v[0], v[1], v[2], v[3], v[4], kind, v[5], WindVelocity::CALM, params);
    let mut values = [0.0; 5];
    let mut jac = [[0.0; 6]; 5];
    for (r, rate) in e.rates.iter().enumerate() {
        values[r] = rate.re;
        let eps = rate.eps.unwrap_generic(nalgebra::Const::<6>, nalgebra::Const::<1>);
        for c in 0..6 {
            jac[r][c] = eps[c];
        }
    }
    (values, jac)
}

/// Wind-free rates at a point `[v_n, v_d, theta, q, effort, elevator]`.
pub fn dynamics_rates(point: [f64; 6], kind: EffortKind, params: &AircraftParams) -> [f64; 5] {
    evaluate(
        point[0],
        point[1],
        point[2],
        point[3],
        point[4],
        kind,
        point[5],
        WindVelocity::CALM,
        params,
    )
    .rates
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flight_model::trim::{published, published_trim};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn level(v: f64, theta: f64) -> LongitudinalState {
        LongitudinalState {
            x_d: -100.0,
            v_n: v,
            v_d: 0.0,
            theta,
            q: 0.0,
        }
    }

    #[test]
    fn lift_decomposes_into_polynomial_and_elevator_terms() {
        let p = AircraftParams::default();
        let s = level(20.0, 0.03);
        let input = ControlInput::Thrust {
            thrust: 20.0,
            elevator: -0.05,
        };
        let out = aero_outputs(&s, &input, WindVelocity::CALM, &p).unwrap();
        let expected = horner(&CL_COEFFS, 0.03) + p.cl_de * -0.05;
        assert_eq!(out.cl, expected);
    }

    #[test]
    fn published_trim_is_near_equilibrium_for_both_variants() {
        let p = AircraftParams::default();
        let trim = published_trim(&p);
        let thrust_in = ControlInput::Thrust {
            thrust: published::THRUST,
            elevator: published::ELEVATOR,
        };
        let throttle_in = ControlInput::Throttle {
            throttle: published::THROTTLE,
            elevator: published::ELEVATOR,
        };
        for input in [thrust_in, throttle_in] {
            let d = dynamics(&trim, &input, WindVelocity::CALM, &p).unwrap();
            assert!(d.max_abs() < 0.05, "{input:?}: {d:?}");
        }
    }

    #[test]
    fn rejects_low_airspeed_and_reverse_flow() {
        let p = AircraftParams::default();
        let input = ControlInput::Thrust {
            thrust: 0.0,
            elevator: 0.0,
        };
        let slow = level(0.05, 0.0);
        assert!(matches!(
            dynamics(&slow, &input, WindVelocity::CALM, &p),
            Err(Error::ModelValidity(_))
        ));
        let backwards = level(-10.0, 0.0);
        assert!(dynamics(&backwards, &input, WindVelocity::CALM, &p).is_err());
    }

    #[test]
    fn headwind_raises_airspeed() {
        let p = AircraftParams::default();
        let s = level(20.0, 0.0);
        let input = ControlInput::Thrust {
            thrust: 0.0,
            elevator: 0.0,
        };
        let calm = aero_outputs(&s, &input, WindVelocity::CALM, &p).unwrap();
        let head = aero_outputs(&s, &input, WindVelocity { north: -5.0, down: 0.0 }, &p).unwrap();
        // same angle of attack, dynamic pressure scales with (25/20)^2
        assert_relative_eq!(head.fz / calm.fz, 1.5625, epsilon = 1e-12);
    }

    #[test]
    fn dynamics_is_bitwise_deterministic() {
        let p = AircraftParams::default();
        let s = LongitudinalState {
            x_d: -50.0,
            v_n: 19.3,
            v_d: 0.7,
            theta: 0.02,
            q: -0.01,
        };
        let input = ControlInput::Throttle {
            throttle: 0.6,
            elevator: -0.04,
        };
        let w = WindVelocity { north: 0.3, down: -0.2 };
        let a = dynamics(&s, &input, w, &p).unwrap().to_array();
        let b = dynamics(&s, &input, w, &p).unwrap().to_array();
        assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
    }

    fn central_difference(point: [f64; 6], kind: EffortKind, p: &AircraftParams) -> [[f64; 6]; 5] {
        let mut jac = [[0.0; 6]; 5];
        for c in 0..6 {
            let h = 1e-6 * point[c].abs().max(1e-2);
            let mut hi = point;
            let mut lo = point;
            hi[c] += h;
            lo[c] -= h;
            let fh = dynamics_rates(hi, kind, p);
            let fl = dynamics_rates(lo, kind, p);
            for r in 0..5 {
                jac[r][c] = (fh[r] - fl[r]) / (2.0 * h);
            }
        }
        jac
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn jacobian_matches_central_differences(
            v_n in 17.0f64..23.0,
            v_d in -2.0f64..2.0,
            theta in -0.08f64..0.08,
            q in -0.2f64..0.2,
            thrust in 10.0f64..50.0,
            throttle in 0.55f64..0.95,
            elevator in -0.15f64..0.05,
        ) {
            let p = AircraftParams::default();
            for (kind, effort) in [(EffortKind::Thrust, thrust), (EffortKind::Throttle, throttle)] {
                let point = [v_n, v_d, theta, q, effort, elevator];
                let (_, ad) = dynamics_jacobian(point, kind, &p);
                let fd = central_difference(point, kind, &p);
                for r in 0..5 {
                    let scale = ad[r].iter().fold(1e-3f64, |m, v| m.max(v.abs()));
                    for c in 0..6 {
                        prop_assert!((ad[r][c] - fd[r][c]).abs() <= 1e-4 * scale,
                            "kind {:?} d{}/d{}: {} vs {}", kind, r, c, ad[r][c], fd[r][c]);
                    }
                }
            }
        }

        #[test]
        fn cx_cz_preserve_coefficient_norm(v_n in 12.0f64..26.0, v_d in -3.0f64..3.0, theta in -0.2f64..0.2) {
            let p = AircraftParams::default();
            let s = LongitudinalState { x_d: -80.0, v_n, v_d, theta, q: 0.0 };
            let input = ControlInput::Thrust { thrust: 10.0, elevator: 0.0 };
            let o = aero_outputs(&s, &input, WindVelocity::CALM, &p).unwrap();
            prop_assert!((o.cx * o.cx + o.cz * o.cz - (o.cl * o.cl + o.cd * o.cd)).abs() < 1e-12);
        }
    }
}
