//! Two-channel (longitudinal and vertical) first-order Dryden turbulence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flight_model::WindVelocity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindConfig {
    pub enabled: bool,
    /// Steady wind, `[north, down]` in m/s.
    pub mean_wind: [f64; 2],
    pub sigma_u: f64,
    pub sigma_w: f64,
    pub length_u: f64,
    pub length_w: f64,
    pub rng_seed: u64,
}

impl Default for WindConfig {
    fn default() -> Self {
        WindConfig {
            enabled: true,
            mean_wind: [0.0, 0.0],
            sigma_u: 0.5,
            sigma_w: 0.5,
            length_u: 200.0,
            length_w: 50.0,
            rng_seed: 0,
        }
    }
}

impl WindConfig {
    pub fn disabled() -> Self {
        WindConfig {
            enabled: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean_wind.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("mean_wind must be finite".into()));
        }
        for (name, v) in [("sigma_u", self.sigma_u), ("sigma_w", self.sigma_w)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        for (name, v) in [("length_u", self.length_u), ("length_w", self.length_w)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn mean(&self) -> WindVelocity {
        WindVelocity {
            north: self.mean_wind[0],
            down: self.mean_wind[1],
        }
    }
}

/// Filter memory and noise stream of one generator.
#[derive(Debug, Clone)]
pub struct WindState {
    rng: ChaCha8Rng,
    gust_u: f64,
    gust_w: f64,
    last_time: Option<f64>,
}

impl WindState {
    pub fn new(config: &WindConfig) -> Self {
        WindState {
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
            gust_u: 0.0,
            gust_w: 0.0,
            last_time: None,
        }
    }

    /// Current gust about the mean, `[u, w]`.
    pub fn gust(&self) -> [f64; 2] {
        [self.gust_u, self.gust_w]
    }
}

/// Advance one first-order shaping filter `x' = a x + σ sqrt(1 - a²) n`.
fn shape(x: f64, sigma: f64, pole: f64, dt: f64, noise: f64) -> f64 {
    let a = (-pole * dt).exp();
    a * x + sigma * (1.0 - a * a).sqrt() * noise
}

/// Wind at time `t` for a vehicle flying at `airspeed`. The first call draws the
/// gusts from the stationary distribution; later calls advance the filters by
/// the elapsed time. The gust acts along the flight path in the north channel
/// and in the down channel for the vertical component.
pub fn wind_sample(t: f64, airspeed: f64, config: &WindConfig, state: WindState) -> (WindVelocity, WindState) {
    if !config.enabled {
        return (config.mean(), state);
    }
    let mut s = state;
    let n_u: f64 = s.rng.sample(StandardNormal);
    let n_w: f64 = s.rng.sample(StandardNormal);
    match s.last_time {
        None => {
            s.gust_u = config.sigma_u * n_u;
            s.gust_w = config.sigma_w * n_w;
        }
        Some(t_prev) => {
            let dt = (t - t_prev).max(0.0);
            let v = airspeed.max(crate::flight_model::dynamics::MIN_AIRSPEED);
            s.gust_u = shape(s.gust_u, config.sigma_u, v / config.length_u, dt, n_u);
            s.gust_w = shape(s.gust_w, config.sigma_w, v / config.length_w, dt, n_w);
        }
    }
    s.last_time = Some(t);
    let mean = config.mean();
    let wind = WindVelocity {
        north: mean.north + s.gust_u,
        down: mean.down + s.gust_w,
    };
    (wind, s)
}
