//! Polynomial aerodynamic coefficient fits as functions of angle of attack.

use num_dual::DualNum;

use crate::error::{ensure_finite, Result};

/// Angle-of-attack range covered by the fitted data [rad].
pub const ALPHA_FIT_RANGE: (f64, f64) = (-0.2, 0.35);

/// Coefficients in ascending powers.
pub const CL_COEFFS: [f64; 6] = [0.533, 4.89, -2.05, -11.4, 55.1, -175.0];
pub const CD_COEFFS: [f64; 7] = [0.0361, 0.155, 0.916, 0.202, -8.55, -13.7, 103.0];
pub const CM_COEFFS: [f64; 4] = [-0.0305, -0.603, -0.0638, 0.255];

/// Horner evaluation with coefficients in ascending powers.
pub fn horner<T: DualNum<Primitive = f64> + Copy>(coeffs: &[f64], x: T) -> T {
    let mut acc = T::from(coeffs[coeffs.len() - 1]);
    for &c in coeffs.iter().rev().skip(1) {
        acc = acc * x + c;
    }
    acc
}

fn checked(what: &'static str, coeffs: &[f64], alpha: f64) -> Result<f64> {
    ensure_finite(what, alpha)?;
    if alpha < ALPHA_FIT_RANGE.0 || alpha > ALPHA_FIT_RANGE.1 {
        log::warn!("{what}: alpha {alpha:.4} rad outside fitted range {ALPHA_FIT_RANGE:?}");
    }
    Ok(horner(coeffs, alpha))
}

pub fn cl_of_alpha(alpha: f64) -> Result<f64> {
    checked("alpha", &CL_COEFFS, alpha)
}

pub fn cd_of_alpha(alpha: f64) -> Result<f64> {
    checked("alpha", &CD_COEFFS, alpha)
}

pub fn cm_of_alpha(alpha: f64) -> Result<f64> {
    checked("alpha", &CM_COEFFS, alpha)
}

/// Aerodynamic coefficients, body-axis forces and the pitching moment at one
/// flight condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroOutputs {
    pub cl: f64,
    pub cd: f64,
    pub cm: f64,
    pub cx: f64,
    pub cz: f64,
    pub fx: f64,
    pub fz: f64,
    pub pitching_moment: f64,
}

/// Rotate wind-axis lift/drag coefficients into body axes.
pub fn body_axis_coefficients<T: DualNum<Primitive = f64> + Copy>(cl: T, cd: T, alpha: T) -> (T, T) {
    let (sa, ca) = alpha.sin_cos();
    let cx = cl * sa - cd * ca;
    let cz = -(cl * ca) - cd * sa;
    (cx, cz)
}
