//! Unscented Kalman filter on `[V_N, V_D, θ, T]` with a random-walk thrust
//! state, and the thrust-fault flag built on its estimate.
//!
//! Measurements are `[V_N, V_D, θ]`. Pitch rate enters the process model as a
//! known input from the rate gyro.

use nalgebra::{Matrix3, Matrix3x4, Matrix4, Matrix4x3, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flight_model::{dynamics_rates, AircraftParams, ControlInput, EffortKind};

pub const NX: usize = 4;
pub const NZ: usize = 3;
const NSIGMA: usize = 2 * NX + 1;

/// Filter time step [s].
pub const FILTER_DT: f64 = 0.01;

/// Index of the thrust component in the filter state.
pub const THRUST: usize = 3;

/// Scaled unscented-transform parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtScaling {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UtScaling {
    fn default() -> Self {
        UtScaling {
            alpha: 0.1,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

impl UtScaling {
    fn lambda(&self) -> f64 {
        self.alpha * self.alpha * (NX as f64 + self.kappa) - NX as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::Config("unscented alpha must be positive and beta finite".into()));
        }
        if !(NX as f64 + self.lambda() > 0.0) {
            return Err(Error::Config("unscented scaling gives n + lambda <= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPoints {
    pub points: [Vector4<f64>; NSIGMA],
    pub mean_weights: [f64; NSIGMA],
    pub cov_weights: [f64; NSIGMA],
}

/// Sigma points at `mean ± columns of sqrt((n+λ)P)`.
pub fn sigma_points(mean: &Vector4<f64>, cov: &Matrix4<f64>, scaling: UtScaling) -> Result<SigmaPoints> {
    let n = NX as f64;
    let lambda = scaling.lambda();
    let c = n + lambda;
    let chol = (cov * c)
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("filter covariance; the filter has diverged"))?;
    let l = chol.l();
    let mut points = [*mean; NSIGMA];
    for i in 0..NX {
        let col = l.column(i);
        points[1 + i] = mean + col;
        points[1 + NX + i] = mean - col;
    }
    let w = 0.5 / c;
    let mut mean_weights = [w; NSIGMA];
    let mut cov_weights = [w; NSIGMA];
    mean_weights[0] = lambda / c;
    cov_weights[0] = lambda / c + 1.0 - scaling.alpha * scaling.alpha + scaling.beta;
    Ok(SigmaPoints {
        points,
        mean_weights,
        cov_weights,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterNoise {
    pub q: Matrix4<f64>,
    pub r: Matrix3<f64>,
}

impl FilterNoise {
    /// Process noise scaled by the update interval `dt`.
    pub fn new(dt: f64) -> Self {
        FilterNoise {
            q: Matrix4::from_diagonal(&Vector4::new(
                (2.0 * dt).powi(2),
                (2.0 * dt).powi(2),
                (0.017 * dt).powi(2),
                (122.0 * dt).powi(2),
            )),
            r: Matrix3::from_diagonal(&Vector3::new(0.5f64.powi(2), 0.5f64.powi(2), 0.17f64.powi(2))),
        }
    }

    /// Standard deviations of the measurement noise.
    pub fn measurement_std(&self) -> [f64; NZ] {
        std::array::from_fn(|i| self.r[(i, i)].sqrt())
    }
}

impl Default for FilterNoise {
    fn default() -> Self {
        FilterNoise::new(FILTER_DT)
    }
}

/// Persistence test on the thrust residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultThresholds {
    /// Residual threshold in thrust standard deviations.
    pub k_sigma: f64,
    /// Consecutive filter steps above threshold before the flag is raised.
    pub persistence: u32,
}

impl Default for FaultThresholds {
    fn default() -> Self {
        FaultThresholds {
            k_sigma: 3.0,
            persistence: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
    pub fault_flag: bool,
    /// Consecutive steps with the residual above threshold.
    pub persistence: u32,
    /// `T̂ + 2σ_T` once the flag is raised.
    pub thrust_bound: Option<f64>,
    /// Last measurement innovation and its covariance.
    pub innovation: Vector3<f64>,
    pub innovation_cov: Matrix3<f64>,
}

impl FilterState {
    pub fn new(mean: Vector4<f64>, cov: Matrix4<f64>) -> Self {
        FilterState {
            mean,
            cov,
            fault_flag: false,
            persistence: 0,
            thrust_bound: None,
            innovation: Vector3::zeros(),
            innovation_cov: Matrix3::zeros(),
        }
    }

    pub fn thrust_estimate(&self) -> f64 {
        self.mean[THRUST]
    }

    pub fn thrust_std(&self) -> f64 {
        self.cov[(THRUST, THRUST)].max(0.0).sqrt()
    }
}

impl Default for FilterState {
    /// Published start: level flight at 20 m/s near trim thrust.
    fn default() -> Self {
        FilterState::new(
            Vector4::new(20.0, 0.0, -0.0040, 27.7426),
            Matrix4::from_diagonal(&Vector4::new(
                0.5f64.powi(2),
                0.5f64.powi(2),
                0.085f64.powi(2),
                6.0f64.powi(2),
            )),
        )
    }
}

fn symmetrize(p: &Matrix4<f64>) -> Matrix4<f64> {
    (p + p.transpose()) * 0.5
}

/// Prediction through an arbitrary discrete process map.
pub fn ukf_predict_with(
    filter: &FilterState,
    noise: &FilterNoise,
    scaling: UtScaling,
    process: impl Fn(&Vector4<f64>) -> Vector4<f64>,
) -> Result<FilterState> {
    let sp = sigma_points(&filter.mean, &filter.cov, scaling)?;
    let moved: [Vector4<f64>; NSIGMA] = std::array::from_fn(|i| process(&sp.points[i]));
    let mean = (0..NSIGMA).fold(Vector4::zeros(), |acc, i| acc + moved[i] * sp.mean_weights[i]);
    if mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "predicted filter mean",
            value: f64::NAN,
        });
    }
    let mut cov = noise.q;
    for (m, w) in moved.iter().zip(&sp.cov_weights) {
        let d = m - mean;
        cov += d * d.transpose() * *w;
    }
    Ok(FilterState {
        mean,
        cov: symmetrize(&cov),
        ..*filter
    })
}

/// Reduced process model: `[V_N, V_D, θ]` follow the flight dynamics with the
/// sigma point's thrust and the applied elevator, `T` is a random walk and the
/// measured pitch rate is held over the step.
pub fn process_model(
    x: &Vector4<f64>,
    elevator: f64,
    pitch_rate: f64,
    params: &AircraftParams,
    dt: f64,
) -> Vector4<f64> {
    let thrust = x[THRUST];
    let f = |s: [f64; 3]| {
        let r = dynamics_rates(
            [s[0], s[1], s[2], pitch_rate, thrust, elevator],
            EffortKind::Thrust,
            params,
        );
        [r[1], r[2], r[3]]
    };
    let s0 = [x[0], x[1], x[2]];
    let step = |s: [f64; 3], k: [f64; 3], h: f64| std::array::from_fn::<f64, 3, _>(|i| s[i] + h * k[i]);
    let k1 = f(s0);
    let k2 = f(step(s0, k1, 0.5 * dt));
    let k3 = f(step(s0, k2, 0.5 * dt));
    let k4 = f(step(s0, k3, dt));
    let s1: [f64; 3] = std::array::from_fn(|i| s0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    Vector4::new(s1[0], s1[1], s1[2], thrust)
}

/// Prediction over one filter step with the aircraft process model.
pub fn ukf_predict(
    filter: &FilterState,
    applied_input: &ControlInput,
    pitch_rate: f64,
    noise: &FilterNoise,
    scaling: UtScaling,
    params: &AircraftParams,
    dt: f64,
) -> Result<FilterState> {
    if !(dt > 0.0 && dt <= crate::flight_model::integrate::MAX_STEP) {
        return Err(Error::OutOfRange {
            what: "filter dt",
            value: dt,
            min: 0.0,
            max: crate::flight_model::integrate::MAX_STEP,
        });
    }
    let elevator = applied_input.elevator();
    ukf_predict_with(filter, noise, scaling, |x| {
        process_model(x, elevator, pitch_rate, params, dt)
    })
}

/// Measurement update with `h(x) = [V_N, V_D, θ]`.
pub fn ukf_update(
    filter: &FilterState,
    measurement: &Vector3<f64>,
    noise: &FilterNoise,
    scaling: UtScaling,
) -> Result<FilterState> {
    if let Some(v) = measurement.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "filter measurement",
            value: *v,
        });
    }
    let sp = sigma_points(&filter.mean, &filter.cov, scaling)?;
    let h = |x: &Vector4<f64>| Vector3::new(x[0], x[1], x[2]);
    let zs: [Vector3<f64>; NSIGMA] = std::array::from_fn(|i| h(&sp.points[i]));
    let z_hat = (0..NSIGMA).fold(Vector3::zeros(), |acc, i| acc + zs[i] * sp.mean_weights[i]);
    let mut s = noise.r;
    let mut pxz = Matrix4x3::zeros();
    for ((z, p), w) in zs.iter().zip(&sp.points).zip(&sp.cov_weights) {
        let dz = z - z_hat;
        s += dz * dz.transpose() * *w;
        pxz += (p - filter.mean) * dz.transpose() * *w;
    }
    let s = (s + s.transpose()) * 0.5;
    let s_inv = s.cholesky().ok_or(Error::Singular("innovation covariance"))?.inverse();
    let gain = pxz * s_inv;
    let innovation = measurement - z_hat;
    let mean = filter.mean + gain * innovation;
    let kskt: Matrix4<f64> = gain * s * gain.transpose();
    let cov = symmetrize(&(filter.cov - kskt));
    Ok(FilterState {
        mean,
        cov,
        innovation,
        innovation_cov: s,
        ..*filter
    })
}

/// Thrust-residual persistence test. The flag latches once raised, and the
/// bound `T̂ + 2σ_T` is refreshed on every call after that.
pub fn fault_logic(filter: &FilterState, commanded_thrust: f64, thresholds: FaultThresholds) -> FilterState {
    let mut out = *filter;
    let sigma = filter.thrust_std();
    let residual = commanded_thrust - filter.thrust_estimate();
    if !out.fault_flag {
        out.persistence = if residual > thresholds.k_sigma * sigma {
            out.persistence + 1
        } else {
            0
        };
        if out.persistence >= thresholds.persistence {
            out.fault_flag = true;
        }
    }
    if out.fault_flag {
        out.thrust_bound = Some(filter.thrust_estimate() + 2.0 * sigma);
    }
    out
}

/// The `[V_N, V_D, θ]` rows of the measurement model, for linear analyses.
pub fn measurement_matrix() -> Matrix3x4<f64> {
    Matrix3x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0)
}
