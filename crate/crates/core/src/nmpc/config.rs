use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flight_model::{EffortKind, ELEVATOR_LIMIT};

/// Scalar weights of the tracking cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub x_d: f64,
    pub airspeed: f64,
    pub v_d: f64,
    /// On the engine command rate (throttle or thrust).
    pub effort_rate: f64,
    pub elevator_rate: f64,
    pub q: f64,
    pub a_d: f64,
}

impl Weights {
    pub fn throttle() -> Self {
        Weights {
            x_d: 5.0,
            airspeed: 1.0,
            v_d: 1.0,
            effort_rate: 0.1,
            elevator_rate: 0.1,
            q: 0.01,
            a_d: 0.01,
        }
    }

    pub fn thrust() -> Self {
        Weights {
            x_d: 10.0,
            airspeed: 5.0,
            v_d: 5.0,
            effort_rate: 0.01,
            elevator_rate: 0.1,
            q: 0.01,
            a_d: 0.01,
        }
    }

    pub fn to_array(self) -> [f64; 7] {
        [
            self.x_d,
            self.airspeed,
            self.v_d,
            self.effort_rate,
            self.elevator_rate,
            self.q,
            self.a_d,
        ]
    }
}

/// Closed interval; either end may be infinite.
pub type Interval = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    /// Height above the datum [m]; the down position is its negative.
    pub altitude: Interval,
    pub v_n: Interval,
    pub v_d: Interval,
    pub elevator: Interval,
    pub elevator_rate: Interval,
    /// Throttle fraction or thrust [N]. The thrust upper end is replaced at
    /// run time by the airspeed-dependent or fault-reconfigured limit.
    pub effort: Interval,
    pub effort_rate: Interval,
}

impl Bounds {
    pub fn throttle() -> Self {
        Bounds {
            effort: [0.0, 1.0],
            effort_rate: [f64::NEG_INFINITY, f64::INFINITY],
            ..Self::thrust()
        }
    }

    pub fn thrust() -> Self {
        let rate = 60f64.to_radians();
        Bounds {
            altitude: [1.0, 300.0],
            v_n: [15.6, 26.0],
            v_d: [-3.0, 3.0],
            elevator: [-ELEVATOR_LIMIT, ELEVATOR_LIMIT],
            elevator_rate: [-rate, rate],
            effort: [0.0, f64::INFINITY],
            effort_rate: [-122.0, 122.0],
        }
    }

    fn all(&self) -> [(&'static str, Interval); 7] {
        [
            ("altitude", self.altitude),
            ("v_n", self.v_n),
            ("v_d", self.v_d),
            ("elevator", self.elevator),
            ("elevator_rate", self.elevator_rate),
            ("effort", self.effort),
            ("effort_rate", self.effort_rate),
        ]
    }
}

/// Hessian model used inside the SQP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HessianMode {
    /// Gauss-Newton start, damped BFGS updates.
    Bfgs,
    /// Gauss-Newton every iteration.
    GaussNewton,
}

/// Missing fields in a config file take the thrust-variant defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmpcConfig {
    pub variant: EffortKind,
    /// Prediction horizon [s].
    pub horizon: f64,
    /// Polynomial degree of the collocation grid (degree + 1 nodes).
    pub degree: usize,
    pub weights: Weights,
    pub bounds: Bounds,
    /// Time between solves [s].
    pub control_period: f64,
    pub max_iterations: usize,
    /// Infinity norm of the equality constraints accepted at convergence.
    pub constraint_tol: f64,
    /// Relative predicted decrease below which the iterate is optimal.
    pub optimality_tol: f64,
    /// Linear penalty on violating state and actuator bounds.
    pub bound_penalty: f64,
    pub hessian: HessianMode,
}

impl NmpcConfig {
    pub fn throttle() -> Self {
        NmpcConfig {
            variant: EffortKind::Throttle,
            weights: Weights::throttle(),
            bounds: Bounds::throttle(),
            ..Self::thrust()
        }
    }

    pub fn thrust() -> Self {
        NmpcConfig {
            variant: EffortKind::Thrust,
            horizon: 5.0,
            degree: 50,
            weights: Weights::thrust(),
            bounds: Bounds::thrust(),
            control_period: 0.1,
            max_iterations: 30,
            constraint_tol: 1e-4,
            optimality_tol: 1e-6,
            bound_penalty: 1e4,
            hessian: HessianMode::Bfgs,
        }
    }

    pub fn for_variant(kind: EffortKind) -> Self {
        match kind {
            EffortKind::Throttle => Self::throttle(),
            EffortKind::Thrust => Self::thrust(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(2..=crate::pseudospectral::MAX_DEGREE).contains(&self.degree) {
            return Err(Error::Config(format!("degree must be in 2..=200, got {}", self.degree)));
        }
        if !(self.control_period > 0.0 && self.control_period < self.horizon) {
            return Err(Error::Config("control_period must lie in (0, horizon)".into()));
        }
        if self.weights.to_array().iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("weights must be finite and non-negative".into()));
        }
        for (name, [lo, hi]) in self.bounds.all() {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::Config(format!("bound {name} is not an interval: [{lo}, {hi}]")));
            }
        }
        if self.max_iterations == 0 || !(self.constraint_tol > 0.0) || !(self.bound_penalty > 0.0) {
            return Err(Error::Config("solver tolerances and limits must be positive".into()));
        }
        Ok(())
    }
}

impl Default for NmpcConfig {
    fn default() -> Self {
        Self::thrust()
    }
}
