//! Propeller chain: throttle → shaft speed → advance ratio → thrust coefficient → force.

use std::f64::consts::PI;

use num_dual::DualNum;

use super::aero::horner;
use super::params::AircraftParams;
use crate::error::{ensure_finite, Error, Result};

/// Shaft speed fit in ascending powers of throttle [rad/s].
pub const OMEGA_COEFFS: [f64; 5] = [-2.94, 772.0, 421.0, -1450.0, 857.0];
/// Thrust coefficient fit in ascending powers of advance ratio.
pub const CT_COEFFS: [f64; 6] = [0.131, -0.054, -0.198, 0.109, -0.0395, 0.00578];
/// Upper end of the advance-ratio range covered by the thrust data.
pub const J_FIT_MAX: f64 = 1.2;

/// Shaft speed for a throttle setting, clamped at zero.
pub fn prop_speed_of_throttle(throttle: f64) -> Result<f64> {
    ensure_finite("throttle", throttle)?;
    if !(0.0..=1.0).contains(&throttle) {
        return Err(Error::OutOfRange {
            what: "throttle",
            value: throttle,
            min: 0.0,
            max: 1.0,
        });
    }
    Ok(prop_speed(throttle))
}

pub(crate) fn prop_speed<T: DualNum<Primitive = f64> + Copy>(throttle: T) -> T {
    let omega = horner(&OMEGA_COEFFS, throttle);
    if omega.re() > 0.0 {
        omega
    } else {
        T::from(0.0)
    }
}

/// `J = V_T / (n D)` with `n = ω / 2π` revolutions per second.
pub fn advance_ratio(airspeed: f64, omega: f64, diameter: f64) -> Result<f64> {
    ensure_finite("airspeed", airspeed)?;
    ensure_finite("omega", omega)?;
    if omega <= 0.0 {
        return Err(Error::ModelValidity(format!(
            "propeller speed {omega} rad/s; advance ratio undefined for a stopped or windmilling propeller"
        )));
    }
    if !(diameter > 0.0) {
        return Err(Error::Config(format!(
            "propeller diameter must be positive, got {diameter}"
        )));
    }
    Ok(airspeed / (omega / (2.0 * PI) * diameter))
}

pub fn ct_of_j(j: f64) -> Result<f64> {
    ensure_finite("advance ratio", j)?;
    if !(0.0..=J_FIT_MAX).contains(&j) {
        log::warn!("advance ratio {j:.3} outside fitted range [0, {J_FIT_MAX}]");
    }
    Ok(horner(&CT_COEFFS, j))
}

/// Total thrust of both engines for a given shaft speed. The advance ratio is
/// held at the edge of the fitted range beyond it, so thrust goes smoothly to
/// zero as the propeller slows instead of following the polynomial's
/// extrapolation.
pub(crate) fn thrust_of_speed<T: DualNum<Primitive = f64> + Copy>(omega: T, airspeed: T, params: &AircraftParams) -> T {
    if omega.re() <= 0.0 {
        return T::from(0.0);
    }
    let d = params.prop_diameter;
    let n = omega * (1.0 / (2.0 * PI));
    let mut j = airspeed / (n * d);
    if j.re() > J_FIT_MAX {
        j = T::from(J_FIT_MAX);
    } else if j.re() < 0.0 {
        j = T::from(0.0);
    }
    let ct = horner(&CT_COEFFS, j);
    ct * n * n * (2.0 * params.air_density * d.powi(4))
}

pub(crate) fn thrust_of_throttle<T: DualNum<Primitive = f64> + Copy>(
    throttle: T,
    airspeed: T,
    params: &AircraftParams,
) -> T {
    thrust_of_speed(prop_speed(throttle), airspeed, params)
}

/// Force and moment of both engines in body axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineLoads {
    pub force: [f64; 3],
    pub moment: [f64; 3],
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Loads for a throttle setting at a given true airspeed.
pub fn engine_force_moment(throttle: f64, airspeed: f64, params: &AircraftParams) -> Result<EngineLoads> {
    ensure_finite("airspeed", airspeed)?;
    if airspeed < 0.0 {
        return Err(Error::OutOfRange {
            what: "airspeed",
            value: airspeed,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    let omega = prop_speed_of_throttle(throttle)?;
    let thrust = if omega > 0.0 {
        let j = advance_ratio(airspeed, omega, params.prop_diameter)?;
        if j > J_FIT_MAX {
            log::warn!("advance ratio {j:.3} beyond fitted range; held at {J_FIT_MAX}");
        }
        thrust_of_speed(omega, airspeed, params)
    } else {
        0.0
    };
    Ok(engine_loads(thrust, params))
}

/// Loads for a total thrust split evenly between the two engines.
pub fn engine_loads(thrust: f64, params: &AircraftParams) -> EngineLoads {
    let half = [0.5 * thrust, 0.0, 0.0];
    let m1 = cross(params.engine_positions[0], half);
    let m2 = cross(params.engine_positions[1], half);
    EngineLoads {
        force: [thrust, 0.0, 0.0],
        moment: [m1[0] + m2[0], m1[1] + m2[1], m1[2] + m2[2]],
    }
}

/// Thrust available at full throttle for the current airspeed.
pub fn max_thrust(airspeed: f64, params: &AircraftParams) -> f64 {
    thrust_of_throttle(1.0, airspeed.max(0.0), params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn shaft_speed_clamped_at_idle() {
        assert_eq!(horner(&OMEGA_COEFFS, 0.0), -2.94);
        assert_eq!(prop_speed_of_throttle(0.0).unwrap(), 0.0);
    }

    #[test]
    fn shaft_speed_at_full_throttle() {
        assert_relative_eq!(prop_speed_of_throttle(1.0).unwrap(), 597.06, epsilon = 1e-10);
    }

    #[test]
    fn shaft_speed_at_trim_throttle() {
        let w = prop_speed_of_throttle(0.7281).unwrap();
        assert!((w - 463.5).abs() < 0.5, "{w}");
    }

    #[test]
    fn throttle_out_of_range() {
        assert!(prop_speed_of_throttle(1.01).is_err());
        assert!(prop_speed_of_throttle(-0.01).is_err());
        assert!(prop_speed_of_throttle(f64::NAN).is_err());
    }

    #[test]
    fn advance_ratio_cases() {
        let j = advance_ratio(20.0, 463.5, 0.4572).unwrap();
        assert_relative_eq!(j, 20.0 / (463.5 / (2.0 * PI) * 0.4572), epsilon = 1e-15);
        assert!((j - 0.593).abs() < 5e-4);
        assert_eq!(advance_ratio(0.0, 463.5, 0.4572).unwrap(), 0.0);
        assert!(advance_ratio(20.0, 0.0, 0.4572).is_err());
    }

    #[test]
    fn thrust_coefficient() {
        assert_eq!(ct_of_j(0.0).unwrap(), 0.131);
        assert!((ct_of_j(0.593).unwrap() - 0.0476).abs() < 5e-4);
        assert!(ct_of_j(0.2).unwrap() > ct_of_j(0.6).unwrap());
        let mut prev = ct_of_j(0.0).unwrap();
        for k in 1..=80 {
            let ct = ct_of_j(k as f64 * 0.01).unwrap();
            assert!(ct < prev);
            prev = ct;
        }
        assert!(ct_of_j(f64::NAN).is_err());
    }

    #[test]
    fn trim_thrust_matches_published_value() {
        let p = AircraftParams::default();
        let loads = engine_force_moment(0.7281, 20.0, &p).unwrap();
        let rel = (loads.force[0] - 27.7426).abs() / 27.7426;
        assert!(rel < 0.01, "thrust {} rel err {rel}", loads.force[0]);
    }

    #[test]
    fn zero_throttle_gives_no_load() {
        let p = AircraftParams::default();
        let loads = engine_force_moment(0.0, 20.0, &p).unwrap();
        assert_eq!(loads.force, [0.0; 3]);
        assert_eq!(loads.moment, [0.0; 3]);
    }

    #[test]
    fn symmetric_engines_without_vertical_offset_give_no_pitch() {
        let p = AircraftParams {
            engine_positions: [[0.3, -1.0, 0.0], [0.3, 1.0, 0.0]],
            ..Default::default()
        };
        let loads = engine_force_moment(0.7281, 20.0, &p).unwrap();
        assert_eq!(loads.moment[1], 0.0);
        assert_eq!(loads.moment[2], 0.0);
    }

    #[test]
    fn offset_engines_pitch_with_thrust() {
        let p = AircraftParams::default();
        let loads = engine_loads(10.0, &p);
        assert_relative_eq!(loads.moment[1], 10.0 * p.engine_pitch_arm(), epsilon = 1e-12);
    }

    #[test]
    fn thrust_vanishes_continuously_at_low_shaft_speed() {
        let p = AircraftParams::default();
        let t: f64 = thrust_of_speed(0.5, 20.0, &p);
        assert!(t.abs() < 1e-2, "{t}");
    }
}
