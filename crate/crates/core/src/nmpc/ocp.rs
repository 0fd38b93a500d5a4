//! Transcription of the tracking problem onto the LGL grid.
//!
//! Decision vector, node-major, nine entries per node:
//! `[x_D, V_N, V_D, θ, q, effort, δe, effort_rate, δe_rate]`.
//! Equality constraints, seven per node: the first block pins node 0 to the
//! initial condition; block `k + 1` is the defect `Σ_l D_kl x_l − h f(x_k) = 0`
//! at node `k = 0..N−1`, with `h = (tf − t0)/2`. Collocating at the initial node
//! ties the slope of every state polynomial at `t0` to the dynamics; the final
//! node is left uncollocated so the system stays square.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::config::NmpcConfig;
use crate::error::{Error, Result};
use crate::flight_model::{dynamics_jacobian, AircraftParams, EffortKind, LongitudinalState};
use crate::pseudospectral::{lgl_grid, CollocationGrid, Horizon};

pub const NV: usize = 9;
pub const NS: usize = 7;
pub const NR: usize = 7;

pub mod var {
    pub const X_D: usize = 0;
    pub const V_N: usize = 1;
    pub const V_D: usize = 2;
    pub const THETA: usize = 3;
    pub const Q: usize = 4;
    pub const EFFORT: usize = 5;
    pub const ELEVATOR: usize = 6;
    pub const EFFORT_RATE: usize = 7;
    pub const ELEVATOR_RATE: usize = 8;
}

/// Grid plus the factors of its differentiation matrix reused every solve.
#[derive(Debug)]
pub struct Transcription {
    pub grid: CollocationGrid,
    /// Inverse of `D[..N, 1..]`, the collocated rows acting on the free nodes.
    pub d_inner_inv: DMatrix<f64>,
}

impl Transcription {
    pub fn new(degree: usize) -> Result<Arc<Self>> {
        let grid = lgl_grid(degree)?;
        let n = degree;
        let inner = grid.diff_matrix().view((0, 1), (n, n)).into_owned();
        let d_inner_inv = inner
            .try_inverse()
            .ok_or(Error::Singular("interior differentiation matrix"))?;
        Ok(Arc::new(Transcription { grid, d_inner_inv }))
    }

    pub fn degree(&self) -> usize {
        self.grid.degree()
    }
}

/// Reference at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefPoint {
    pub altitude: f64,
    pub airspeed: f64,
    pub v_d: f64,
}

/// Initial condition: physical state plus actuator positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialCondition {
    pub state: LongitudinalState,
    pub effort: f64,
    pub elevator: f64,
}

impl InitialCondition {
    pub fn to_array(&self) -> [f64; NS] {
        let s = self.state.to_array();
        [s[0], s[1], s[2], s[3], s[4], self.effort, self.elevator]
    }
}

/// Per-node box on a decision variable; `None` entries are unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarBounds {
    pub lower: [f64; NV],
    pub upper: [f64; NV],
}

#[derive(Debug, Clone)]
pub struct OcpProblem {
    pub tr: Arc<Transcription>,
    pub horizon: Horizon,
    pub initial: InitialCondition,
    pub reference: Vec<RefPoint>,
    pub config: NmpcConfig,
    pub params: AircraftParams,
    /// Bounds applied at nodes 1..N (node 0 is fixed by the initial condition).
    pub bounds: VarBounds,
}

/// Everything the solver needs at one iterate.
pub struct Linearization {
    /// Constraint values, `NS (N+1)`.
    pub c: DVector<f64>,
    /// Cost residuals, `NR (N+1)`; cost is `½ |r|²`.
    pub r: DVector<f64>,
    /// Per node: dynamics rates and their Jacobian w.r.t. `[V_N, V_D, θ, q, effort, δe]`.
    pub rates: Vec<[f64; 5]>,
    pub jac: Vec<[[f64; 6]; 5]>,
}

impl Linearization {
    pub fn cost(&self) -> f64 {
        0.5 * self.r.norm_squared()
    }
}

#[inline]
pub fn idx(node: usize, v: usize) -> usize {
    NV * node + v
}

pub fn build_ocp(
    tr: Arc<Transcription>,
    t0: f64,
    initial: InitialCondition,
    reference: Vec<RefPoint>,
    config: &NmpcConfig,
    thrust_upper_bound: Option<f64>,
    params: &AircraftParams,
) -> Result<OcpProblem> {
    config.validate()?;
    if tr.degree() != config.degree {
        return Err(Error::Config(format!(
            "transcription degree {} differs from configured degree {}",
            tr.degree(),
            config.degree
        )));
    }
    if reference.len() != tr.grid.len() {
        return Err(Error::Config(format!(
            "reference has {} samples, grid has {} nodes",
            reference.len(),
            tr.grid.len()
        )));
    }
    for v in initial.to_array() {
        crate::error::ensure_finite("initial condition", v)?;
    }
    let horizon = tr.grid.map_to_horizon(t0, t0 + config.horizon)?;
    let b = &config.bounds;
    let inf = f64::INFINITY;
    let mut lower = [-inf; NV];
    let mut upper = [inf; NV];
    lower[var::X_D] = -b.altitude[1];
    upper[var::X_D] = -b.altitude[0];
    [lower[var::V_N], upper[var::V_N]] = b.v_n;
    [lower[var::V_D], upper[var::V_D]] = b.v_d;
    [lower[var::EFFORT], upper[var::EFFORT]] = b.effort;
    [lower[var::ELEVATOR], upper[var::ELEVATOR]] = b.elevator;
    [lower[var::EFFORT_RATE], upper[var::EFFORT_RATE]] = b.effort_rate;
    [lower[var::ELEVATOR_RATE], upper[var::ELEVATOR_RATE]] = b.elevator_rate;
    if config.variant == EffortKind::Thrust {
        if let Some(ub) = thrust_upper_bound {
            crate::error::ensure_finite("thrust upper bound", ub)?;
            upper[var::EFFORT] = ub.max(lower[var::EFFORT]);
        }
    }
    Ok(OcpProblem {
        tr,
        horizon,
        initial,
        reference,
        config: config.clone(),
        params: params.clone(),
        bounds: VarBounds { lower, upper },
    })
}

impl OcpProblem {
    pub fn nodes(&self) -> usize {
        self.tr.grid.len()
    }

    pub fn n_vars(&self) -> usize {
        NV * self.nodes()
    }

    pub fn n_constraints(&self) -> usize {
        NS * self.nodes()
    }

    /// `sqrt(2 h w_j)` and the square roots of the weights.
    fn residual_scales(&self) -> (Vec<f64>, [f64; NR]) {
        let h = self.horizon.scale;
        let node = self.tr.grid.weights().iter().map(|w| (2.0 * h * w).sqrt()).collect();
        let q = self.config.weights.to_array().map(f64::sqrt);
        (node, q)
    }

    pub fn linearize(&self, w: &DVector<f64>) -> Linearization {
        let n1 = self.nodes();
        let h = self.horizon.scale;
        let kind = self.config.variant;
        let mut rates = Vec::with_capacity(n1);
        let mut jac = Vec::with_capacity(n1);
        for j in 0..n1 {
            let p = [
                w[idx(j, var::V_N)],
                w[idx(j, var::V_D)],
                w[idx(j, var::THETA)],
                w[idx(j, var::Q)],
                w[idx(j, var::EFFORT)],
                w[idx(j, var::ELEVATOR)],
            ];
            let (f, df) = dynamics_jacobian(p, kind, &self.params);
            rates.push(f);
            jac.push(df);
        }
        let d = self.tr.grid.diff_matrix();
        let x0 = self.initial.to_array();
        let mut c = DVector::zeros(self.n_constraints());
        for s in 0..NS {
            c[s] = w[idx(0, s)] - x0[s];
        }
        for j in 0..n1 - 1 {
            for s in 0..NS {
                let mut acc = 0.0;
                for k in 0..n1 {
                    acc += d[(j, k)] * w[idx(k, s)];
                }
                let f = match s {
                    var::EFFORT => w[idx(j, var::EFFORT_RATE)],
                    var::ELEVATOR => w[idx(j, var::ELEVATOR_RATE)],
                    _ => rates[j][s],
                };
                c[NS * (j + 1) + s] = acc - h * f;
            }
        }
        let (node_scale, q) = self.residual_scales();
        let mut r = DVector::zeros(NR * n1);
        for j in 0..n1 {
            let rf = &self.reference[j];
            let vt = w[idx(j, var::V_N)].hypot(w[idx(j, var::V_D)]);
            let e = [
                w[idx(j, var::X_D)] + rf.altitude,
                vt - rf.airspeed,
                w[idx(j, var::V_D)] - rf.v_d,
                w[idx(j, var::EFFORT_RATE)],
                w[idx(j, var::ELEVATOR_RATE)],
                w[idx(j, var::Q)],
                rates[j][2],
            ];
            for k in 0..NR {
                r[NR * j + k] = node_scale[j] * q[k] * e[k];
            }
        }
        Linearization { c, r, rates, jac }
    }

    /// Nonzero residual derivatives at node `j`: `(residual index, variable, value)`.
    pub(crate) fn residual_jacobian_node(
        &self,
        w: &DVector<f64>,
        lin: &Linearization,
        j: usize,
        node_scale: f64,
        q: &[f64; NR],
        out: &mut Vec<(usize, usize, f64)>,
    ) {
        out.clear();
        let vn = w[idx(j, var::V_N)];
        let vd = w[idx(j, var::V_D)];
        let vt = vn.hypot(vd).max(1e-9);
        let s = node_scale;
        out.push((0, var::X_D, s * q[0]));
        out.push((1, var::V_N, s * q[1] * vn / vt));
        out.push((1, var::V_D, s * q[1] * vd / vt));
        out.push((2, var::V_D, s * q[2]));
        out.push((3, var::EFFORT_RATE, s * q[3]));
        out.push((4, var::ELEVATOR_RATE, s * q[4]));
        out.push((5, var::Q, s * q[5]));
        let a_d = &lin.jac[j][2];
        for (col, v) in [var::V_N, var::V_D, var::THETA, var::Q, var::EFFORT, var::ELEVATOR]
            .into_iter()
            .enumerate()
        {
            out.push((6, v, s * q[6] * a_d[col]));
        }
    }

    pub fn cost(&self, w: &DVector<f64>) -> f64 {
        self.linearize(w).cost()
    }

    pub fn constraints(&self, w: &DVector<f64>) -> DVector<f64> {
        self.linearize(w).c
    }

    /// Dense `∂r/∂w`.
    pub fn residual_jacobian(&self, w: &DVector<f64>, lin: &Linearization) -> DMatrix<f64> {
        let n1 = self.nodes();
        let (node_scale, q) = self.residual_scales();
        let mut jr = DMatrix::zeros(NR * n1, self.n_vars());
        let mut buf = Vec::new();
        for j in 0..n1 {
            self.residual_jacobian_node(w, lin, j, node_scale[j], &q, &mut buf);
            for &(k, v, val) in &buf {
                jr[(NR * j + k, idx(j, v))] += val;
            }
        }
        jr
    }

    pub fn cost_gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        let lin = self.linearize(w);
        self.residual_jacobian(w, &lin).transpose() * &lin.r
    }

    /// Dense `∂c/∂w`.
    pub fn constraint_jacobian(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let lin = self.linearize(w);
        let n1 = self.nodes();
        let h = self.horizon.scale;
        let d = self.tr.grid.diff_matrix();
        let mut jc = DMatrix::zeros(self.n_constraints(), self.n_vars());
        for s in 0..NS {
            jc[(s, idx(0, s))] = 1.0;
        }
        let cols = [var::V_N, var::V_D, var::THETA, var::Q, var::EFFORT, var::ELEVATOR];
        for j in 0..n1 - 1 {
            for s in 0..NS {
                let row = NS * (j + 1) + s;
                for k in 0..n1 {
                    jc[(row, idx(k, s))] += d[(j, k)];
                }
                match s {
                    var::EFFORT => jc[(row, idx(j, var::EFFORT_RATE))] -= h,
                    var::ELEVATOR => jc[(row, idx(j, var::ELEVATOR_RATE))] -= h,
                    _ => {
                        for (c, &v) in cols.iter().enumerate() {
                            jc[(row, idx(j, v))] -= h * lin.jac[j][s][c];
                        }
                    }
                }
            }
        }
        jc
    }

    /// Decision vector holding the initial condition at every node, the
    /// position advancing with the initial sink rate, and zero rates.
    pub fn constant_guess(&self) -> DVector<f64> {
        let x0 = self.initial.to_array();
        let mut w = DVector::zeros(self.n_vars());
        for (j, t) in self.horizon.times.iter().enumerate() {
            for s in 0..NS {
                w[idx(j, s)] = x0[s];
            }
            w[idx(j, var::X_D)] += x0[var::V_D] * (t - self.horizon.t0);
        }
        w
    }

    /// Bounds on variable `v` at node `j`. State and actuator bounds start
    /// after the first control period: nothing the solver decides can move
    /// the nodes before it far from the initial condition.
    pub fn node_bounds(&self, j: usize, v: usize) -> (f64, f64) {
        let rate = matches!(v, var::EFFORT_RATE | var::ELEVATOR_RATE);
        if rate || self.horizon.times[j] - self.horizon.t0 >= self.config.control_period - 1e-12 {
            (self.bounds.lower[v], self.bounds.upper[v])
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        }
    }

    /// Largest violation of the node bounds at nodes 1..N, per variable.
    pub fn bound_violation(&self, w: &DVector<f64>) -> [f64; NV] {
        let mut worst = [0.0f64; NV];
        for j in 1..self.nodes() {
            for v in 0..NV {
                let (lo, hi) = self.node_bounds(j, v);
                let x = w[idx(j, v)];
                let viol = (lo - x).max(x - hi).max(0.0);
                worst[v] = worst[v].max(viol);
            }
        }
        worst
    }
}
