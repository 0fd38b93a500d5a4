//! Reduced-space SQP for the transcribed problem.
//!
//! The rates are the independent variables. For a step in the rates the
//! linearised defects fix the state step: actuator and position rows are
//! inverted through `D[1..,1..]⁻¹`, the four coupled flight states through one
//! dense LU. The QP in the rates keeps rate bounds hard and relaxes state and
//! actuator bounds with one penalised slack per variable type and node.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::config::HessianMode;
use super::ocp::{idx, var, Linearization, OcpProblem, Transcription, NR, NS, NV};
use crate::error::{Error, Result};
use crate::flight_model::ControlInput;
use crate::pseudospectral::Horizon;
use crate::qp::solve_qp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    Converged,
    /// Stopped short of the tolerances: iteration cap or a stalled merit.
    MaxIter,
    Infeasible,
}

impl SolveStatus {
    pub fn code(self) -> u8 {
        match self {
            SolveStatus::Converged => 0,
            SolveStatus::MaxIter => 1,
            SolveStatus::Infeasible => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OcpSolution {
    pub tr: Arc<Transcription>,
    pub horizon: Horizon,
    /// Decision vector, see [`super::ocp`] for the layout.
    pub w: DVector<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub cost: f64,
    pub kkt_residual: f64,
    /// Infinity norm of the equality constraints.
    pub constraint_violation: f64,
    /// Largest bound violation over nodes 1..N.
    pub bound_violation: f64,
    /// Control to hold over the next period, clamped to its bounds.
    pub first_input: ControlInput,
    /// Merit before and after every accepted step (same penalty parameter).
    pub merit_steps: Vec<(f64, f64)>,
}

impl OcpSolution {
    pub fn node_values(&self, v: usize) -> Vec<f64> {
        (0..self.tr.grid.len()).map(|j| self.w[idx(j, v)]).collect()
    }

    /// Planned value of variable `v` at time `t` (held outside the horizon).
    pub fn value_at(&self, v: usize, t: f64) -> f64 {
        let t = t.clamp(self.horizon.t0, self.horizon.tf);
        self.tr
            .grid
            .interpolate(&self.node_values(v), self.horizon.tau_of(t).clamp(-1.0, 1.0))
    }
}

const SOFT: [usize; 5] = [var::X_D, var::V_N, var::V_D, var::EFFORT, var::ELEVATOR];
/// Relative penalty of each soft bound. Without the thrust to hold everything,
/// the airspeed floor (stall margin) and the vertical speed limits give way last.
const SOFT_WEIGHT: [f64; 5] = [1.0, 10.0, 10.0, 1.0, 1.0];
const SLACK_CURVATURE: f64 = 1.0;
/// Relative merit decrease below which an accepted step counts as stalled,
/// and the run of such steps that ends the solve.
const STALL_TOL: f64 = 1e-5;
const STALL_ITERATIONS: usize = 3;
/// Largest defect of a previous solution still used as a warm start.
const WARM_START_MAX_DEFECT: f64 = 1e-2;

/// Linearised constraint solve `c_y dy = -(c + c_u du)` in factored form.
/// Defect row `k` (node `k = 0..N−1`) acts on the free nodes `l = 1..N`,
/// stored at position `l − 1`.
struct NullSpace {
    n: usize,
    h: f64,
    m: DMatrix<f64>,
    d0: DVector<f64>,
    k_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// Flight-state rows of the dynamics Jacobian at node 0.
    jac0: [[f64; 6]; 4],
    /// `∂f/∂(effort, δe)` at nodes 0..N−1 for the four flight states.
    act_sens: Vec<[[f64; 2]; 4]>,
    /// `dy/du`, `NS (N+1) × 2 (N+1)`.
    z: DMatrix<f64>,
}

impl NullSpace {
    fn new(p: &OcpProblem, lin: &Linearization) -> Result<Self> {
        let n = p.tr.degree();
        let n1 = n + 1;
        let h = p.horizon.scale;
        let d = p.tr.grid.diff_matrix();
        let m = p.tr.d_inner_inv.clone();
        let d0 = DVector::from_iterator(n, (0..n).map(|k| d[(k, 0)]));

        let mut k = DMatrix::zeros(4 * n, 4 * n);
        for a in 0..4 {
            for row in 0..n {
                for l in 1..=n {
                    k[(a * n + row, a * n + l - 1)] = d[(row, l)];
                }
            }
        }
        for row in 1..n {
            let jac = &lin.jac[row];
            for a in 0..4 {
                for b in 0..4 {
                    k[(a * n + row, b * n + row - 1)] -= h * jac[a + 1][b];
                }
            }
        }
        let act_sens: Vec<[[f64; 2]; 4]> = (0..n)
            .map(|row| std::array::from_fn(|a| [lin.jac[row][a + 1][4], lin.jac[row][a + 1][5]]))
            .collect();
        let jac0 = std::array::from_fn(|a| lin.jac[0][a + 1]);
        let k_lu = k.lu();
        if !k_lu.is_invertible() {
            return Err(Error::Singular("collocation defect Jacobian"));
        }

        // Actuators: dA[l] = h Σ_k M[l−1, k] dR[k] over the collocated nodes.
        let mut z = DMatrix::zeros(NS * n1, 2 * n1);
        for r in 0..2 {
            let s = var::EFFORT + r;
            for l in 1..=n {
                for kc in 0..n {
                    z[(NS * l + s, 2 * kc + r)] = h * m[(l - 1, kc)];
                }
            }
        }
        // Flight states: actuator motion at nodes 1..N−1 drives the defects.
        let mut rhs = DMatrix::zeros(4 * n, 2 * n);
        for row in 1..n {
            for a in 0..4 {
                for r in 0..2 {
                    let sens = h * act_sens[row][a][r];
                    for kc in 0..n {
                        rhs[(a * n + row, r * n + kc)] = sens * h * m[(row - 1, kc)];
                    }
                }
            }
        }
        let zc = k_lu.solve(&rhs).ok_or(Error::Singular("collocation defect Jacobian"))?;
        for a in 0..4 {
            for l in 1..=n {
                for r in 0..2 {
                    for kc in 0..n {
                        z[(NS * l + a + 1, 2 * kc + r)] = zc[(a * n + l - 1, r * n + kc)];
                    }
                }
            }
        }
        // Position: dX[l] = h Σ_{k≥1} M[l−1, k] dV_D[k].
        let vd = 1;
        for r in 0..2 {
            for kc in 0..n {
                for l in 1..=n {
                    let mut acc = 0.0;
                    for row in 1..n {
                        acc += m[(l - 1, row)] * zc[(vd * n + row - 1, r * n + kc)];
                    }
                    z[(NS * l + var::X_D, 2 * kc + r)] = h * acc;
                }
            }
        }
        Ok(NullSpace {
            n,
            h,
            m,
            d0,
            k_lu,
            jac0,
            act_sens,
            z,
        })
    }

    /// Dependent step cancelling the constraint residual `c` with the rates held.
    fn particular(&self, c: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let h = self.h;
        let mut y = DVector::zeros(NS * (n + 1));
        let y0: [f64; NS] = std::array::from_fn(|s| -c[s]);
        for s in 0..NS {
            y[s] = y0[s];
        }
        let channel = |s: usize, extra: &dyn Fn(usize) -> f64| -> DVector<f64> {
            let rhs = DVector::from_iterator(n, (0..n).map(|k| -c[NS * (k + 1) + s] - self.d0[k] * y0[s] + extra(k)));
            &self.m * rhs
        };
        let y_eff = channel(var::EFFORT, &|_| 0.0);
        let y_elv = channel(var::ELEVATOR, &|_| 0.0);
        let mut rhs = DVector::zeros(4 * n);
        for a in 0..4 {
            let s = a + 1;
            for row in 0..n {
                let sens = self.act_sens[row][a];
                let coupling = if row == 0 {
                    let j = &self.jac0[a];
                    (0..4).map(|b| j[b] * y0[b + 1]).sum::<f64>()
                        + sens[0] * y0[var::EFFORT]
                        + sens[1] * y0[var::ELEVATOR]
                } else {
                    sens[0] * y_eff[row - 1] + sens[1] * y_elv[row - 1]
                };
                rhs[a * n + row] = -c[NS * (row + 1) + s] - self.d0[row] * y0[s] + h * coupling;
            }
        }
        let yc = self.k_lu.solve(&rhs).expect("factorisation checked at construction");
        let y_xd = channel(var::X_D, &|k| h * if k == 0 { y0[var::V_D] } else { yc[n + k - 1] });
        for l in 1..=n {
            y[NS * l + var::X_D] = y_xd[l - 1];
            for a in 0..4 {
                y[NS * l + a + 1] = yc[a * n + l - 1];
            }
            y[NS * l + var::EFFORT] = y_eff[l - 1];
            y[NS * l + var::ELEVATOR] = y_elv[l - 1];
        }
        y
    }
}

fn rates_of(w: &DVector<f64>, n1: usize) -> DVector<f64> {
    DVector::from_iterator(
        2 * n1,
        (0..n1).flat_map(|j| [w[idx(j, var::EFFORT_RATE)], w[idx(j, var::ELEVATOR_RATE)]]),
    )
}

/// Full-space step from dependent and independent parts.
fn assemble(dy: &DVector<f64>, du: &DVector<f64>, n1: usize) -> DVector<f64> {
    let mut p = DVector::zeros(NV * n1);
    for j in 0..n1 {
        for s in 0..NS {
            p[idx(j, s)] = dy[NS * j + s];
        }
        p[idx(j, var::EFFORT_RATE)] = du[2 * j];
        p[idx(j, var::ELEVATOR_RATE)] = du[2 * j + 1];
    }
    p
}

struct Merit<'a> {
    p: &'a OcpProblem,
}

impl Merit<'_> {
    /// Weighted violation of each soft bound at nodes 1..N, laid out like the
    /// slacks.
    fn soft_violation(&self, w: &DVector<f64>) -> Vec<f64> {
        let n1 = self.p.nodes();
        let mut out = Vec::with_capacity(SOFT.len() * (n1 - 1));
        for (&v, &k) in SOFT.iter().zip(&SOFT_WEIGHT) {
            for j in 1..n1 {
                let (lo, hi) = self.p.node_bounds(j, v);
                let x = w[idx(j, v)];
                out.push(k * (lo - x).max(x - hi).max(0.0));
            }
        }
        out
    }

    fn value(&self, lin: &Linearization, w: &DVector<f64>, mu: f64) -> f64 {
        let rho = self.p.config.bound_penalty;
        lin.cost() + mu * lin.c.lp_norm(1) + rho * self.soft_violation(w).iter().sum::<f64>()
    }
}

/// Reduced residual Jacobian `J_y Z + J_u` and the linearised residual after
/// the dependent step `r + J_y y`.
fn reduced_residuals(
    p: &OcpProblem,
    w: &DVector<f64>,
    lin: &Linearization,
    ns: &NullSpace,
    y: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let n1 = p.nodes();
    let h = p.horizon.scale;
    let q = p.config.weights.to_array().map(f64::sqrt);
    let mut jred = DMatrix::zeros(NR * n1, 2 * n1);
    let mut rlin = lin.r.clone();
    let mut buf = Vec::new();
    for j in 0..n1 {
        let scale = (2.0 * h * p.tr.grid.weights()[j]).sqrt();
        p.residual_jacobian_node(w, lin, j, scale, &q, &mut buf);
        for &(k, v, val) in &buf {
            let row = NR * j + k;
            if v < NS {
                let dep = NS * j + v;
                rlin[row] += val * y[dep];
                let zrow = ns.z.row(dep);
                for (col, zv) in zrow.iter().enumerate() {
                    if *zv != 0.0 {
                        jred[(row, col)] += val * zv;
                    }
                }
            } else {
                jred[(row, 2 * j + (v - NS))] += val;
            }
        }
    }
    (jred, rlin)
}

fn damped(mut b: DMatrix<f64>) -> DMatrix<f64> {
    let n = b.nrows();
    let scale = (0..n).map(|i| b[(i, i)].abs()).fold(0.0, f64::max);
    let delta = 1e-9 * scale + 1e-12;
    for i in 0..n {
        b[(i, i)] += delta;
    }
    b
}

fn bfgs_update(b: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let bs = &*b * s;
    let sbs = s.dot(&bs);
    if !(sbs > 1e-300) {
        return;
    }
    let sy = s.dot(y);
    let theta = if sy >= 0.2 * sbs { 1.0 } else { 0.8 * sbs / (sbs - sy) };
    let r = y * theta + &bs * (1.0 - theta);
    let sr = s.dot(&r);
    if !(sr > 0.0) {
        return;
    }
    *b -= &bs * bs.transpose() / sbs;
    *b += &r * r.transpose() / sr;
    // Keep exact symmetry against round-off drift.
    let bt = b.transpose();
    *b = (&*b + bt) * 0.5;
}

struct QpStep {
    du: DVector<f64>,
    slack: Vec<f64>,
}

/// Fraction of a bound's range within which a node's bound enters the QP.
const SCREEN_FRACTION: f64 = 0.2;

fn solve_subproblem(
    p: &OcpProblem,
    w: &DVector<f64>,
    ns: &NullSpace,
    y: &DVector<f64>,
    b: &DMatrix<f64>,
    g: &DVector<f64>,
) -> std::result::Result<QpStep, crate::qp::QpError> {
    // Slacks only where the linearised point already breaks a bound; the
    // rest are hard. If that QP is infeasible every screened bound is relaxed.
    subproblem(p, w, ns, y, b, g, false).or_else(|_| subproblem(p, w, ns, y, b, g, true))
}

fn subproblem(
    p: &OcpProblem,
    w: &DVector<f64>,
    ns: &NullSpace,
    y: &DVector<f64>,
    b: &DMatrix<f64>,
    g: &DVector<f64>,
    all_soft: bool,
) -> std::result::Result<QpStep, crate::qp::QpError> {
    let n1 = p.nodes();
    let nu = 2 * n1;
    let lb = &p.bounds.lower;
    let ub = &p.bounds.upper;
    // Bounds far from the linearised point stay out of the QP. A step that
    // crosses one is still charged by the merit and picked up next iteration.
    let mut screened = Vec::new();
    let mut n_slack = 0;
    for (t, &v) in SOFT.iter().enumerate() {
        let range = ub[v] - lb[v];
        let margin = if range.is_finite() {
            SCREEN_FRACTION * range
        } else {
            1.0
        };
        for j in 1..n1 {
            let (lo, hi) = p.node_bounds(j, v);
            let val = w[idx(j, v)] + y[NS * j + v];
            if val < lo + margin || val > hi - margin {
                let slack = (all_soft || val < lo || val > hi).then(|| {
                    n_slack += 1;
                    nu + n_slack - 1
                });
                screened.push((t * (n1 - 1) + j - 1, j, t, val, slack));
            }
        }
    }
    let nx = nu + n_slack;
    let rho = p.config.bound_penalty;
    let mut h = DMatrix::zeros(nx, nx);
    h.view_mut((0, 0), (nu, nu)).copy_from(b);
    let mut a = DVector::zeros(nx);
    a.rows_mut(0, nu).copy_from(g);
    for &(.., t, _, slack) in &screened {
        if let Some(s) = slack {
            h[(s, s)] = SLACK_CURVATURE;
            a[s] = rho * SOFT_WEIGHT[t];
        }
    }
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    let u = rates_of(w, n1);
    for i in 0..nu {
        let v = var::EFFORT_RATE + i % 2;
        if lb[v].is_finite() {
            let mut row = DVector::zeros(nx);
            row[i] = 1.0;
            rows.push((row, lb[v] - u[i]));
        }
        if ub[v].is_finite() {
            let mut row = DVector::zeros(nx);
            row[i] = -1.0;
            rows.push((row, u[i] - ub[v]));
        }
    }
    for &(_, j, t, val, slack) in &screened {
        let v = SOFT[t];
        let zrow = ns.z.row(NS * j + v);
        let (lo, hi) = p.node_bounds(j, v);
        if lo.is_finite() {
            let mut row = DVector::zeros(nx);
            row.rows_mut(0, nu).copy_from(&zrow.transpose());
            if let Some(sl) = slack {
                row[sl] = 1.0;
            }
            rows.push((row, lo - val));
        }
        if hi.is_finite() {
            let mut row = DVector::zeros(nx);
            row.rows_mut(0, nu).copy_from(&(-zrow.transpose()));
            if let Some(sl) = slack {
                row[sl] = 1.0;
            }
            rows.push((row, val - hi));
        }
        if let Some(sl) = slack {
            let mut row = DVector::zeros(nx);
            row[sl] = 1.0;
            rows.push((row, 0.0));
        }
    }
    let mut c = DMatrix::zeros(rows.len(), nx);
    let mut bvec = DVector::zeros(rows.len());
    for (i, (row, bound)) in rows.into_iter().enumerate() {
        c.row_mut(i).copy_from(&row.transpose());
        bvec[i] = bound;
    }
    let sol = solve_qp(&h, &a, &c, &bvec, 20 * nx)?;
    let du = sol.x.rows(0, nu).into_owned();
    // Bounds without a slack report the violation the linear model predicts.
    let dz = &ns.z * &du;
    let mut slack = Vec::with_capacity(SOFT.len() * (n1 - 1));
    for (&v, &k) in SOFT.iter().zip(&SOFT_WEIGHT) {
        for j in 1..n1 {
            let (lo, hi) = p.node_bounds(j, v);
            let x = w[idx(j, v)] + y[NS * j + v] + dz[NS * j + v];
            slack.push(k * (lo - x).max(x - hi).max(0.0));
        }
    }
    for &(pos, _, t, _, sl) in &screened {
        if let Some(sl) = sl {
            slack[pos] = SOFT_WEIGHT[t] * sol.x[sl].max(0.0);
        }
    }
    Ok(QpStep { du, slack })
}

/// Shift a previous solution onto the node times of `p`, holding its last
/// node beyond its horizon, then impose the new initial condition.
pub fn shifted_guess(prev: &OcpSolution, p: &OcpProblem) -> DVector<f64> {
    if prev.tr.degree() != p.tr.degree() {
        return p.constant_guess();
    }
    let mut w = DVector::zeros(p.n_vars());
    let cols: Vec<Vec<f64>> = (0..NV).map(|v| prev.node_values(v)).collect();
    for (j, &t) in p.horizon.times.iter().enumerate() {
        let tc = t.clamp(prev.horizon.t0, prev.horizon.tf);
        let tau = prev.horizon.tau_of(tc).clamp(-1.0, 1.0);
        for v in 0..NV {
            w[idx(j, v)] = prev.tr.grid.interpolate(&cols[v], tau);
        }
    }
    let x0 = p.initial.to_array();
    for s in 0..NS {
        w[idx(0, s)] = x0[s];
    }
    w
}

fn clamp_rates(p: &OcpProblem, w: &mut DVector<f64>) {
    for j in 0..p.nodes() {
        for v in [var::EFFORT_RATE, var::ELEVATOR_RATE] {
            w[idx(j, v)] = w[idx(j, v)].clamp(p.bounds.lower[v], p.bounds.upper[v]);
        }
    }
}

fn first_input(p: &OcpProblem, sol_w: &DVector<f64>) -> ControlInput {
    let grid = &p.tr.grid;
    let period = p.config.control_period;
    let tau = p.horizon.tau_of(p.horizon.t0 + period);
    let col = |v: usize| -> Vec<f64> { (0..p.nodes()).map(|j| sol_w[idx(j, v)]).collect() };
    let mut out = [0.0; 2];
    for (i, (v, rate)) in [(var::EFFORT, var::EFFORT_RATE), (var::ELEVATOR, var::ELEVATOR_RATE)]
        .into_iter()
        .enumerate()
    {
        let start = p.initial.to_array()[v];
        let mut value = grid.interpolate(&col(v), tau);
        if !value.is_finite() {
            value = start;
        }
        let lo = start + p.bounds.lower[rate] * period;
        let hi = start + p.bounds.upper[rate] * period;
        value = value.clamp(lo.min(hi), hi.max(lo));
        out[i] = value.clamp(p.bounds.lower[v], p.bounds.upper[v]);
    }
    ControlInput::new(p.config.variant, out[0], out[1])
}

/// Solve the transcribed problem from the shifted warm start, or from the
/// constant initial condition when none is given.
pub fn solve_ocp(p: &OcpProblem, warm_start: Option<&OcpSolution>) -> Result<OcpSolution> {
    let n1 = p.nodes();
    let cfg = &p.config;
    // A solve that stopped far from dynamic feasibility is a poor start.
    let mut w = match warm_start {
        Some(prev) if prev.constraint_violation <= WARM_START_MAX_DEFECT => shifted_guess(prev, p),
        _ => p.constant_guess(),
    };
    clamp_rates(p, &mut w);
    if w.iter().any(|v| !v.is_finite()) {
        w = p.constant_guess();
    }
    let merit = Merit { p };
    let mut mu = 1.0;
    let mut b: Option<DMatrix<f64>> = None;
    let mut pending: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut status = SolveStatus::MaxIter;
    let mut iterations = 0;
    let mut kkt = f64::INFINITY;
    let mut merit_steps = Vec::new();
    let mut restorations = 0;
    let mut stalled = 0;

    let mut lin = p.linearize(&w);
    while iterations < cfg.max_iterations {
        iterations += 1;
        let ns = match NullSpace::new(p, &lin) {
            Ok(ns) => ns,
            Err(_) => {
                status = SolveStatus::Infeasible;
                break;
            }
        };
        let y = ns.particular(&lin.c);
        let (jred, rlin) = reduced_residuals(p, &w, &lin, &ns, &y);
        let reduced_grad = jred.transpose() * &lin.r;
        let gn = || damped(jred.transpose() * &jred);
        let mut bk = match (cfg.hessian, b.take(), pending.take()) {
            (HessianMode::Bfgs, Some(mut bprev), Some((s, gprev))) => {
                bfgs_update(&mut bprev, &s, &(&reduced_grad - gprev));
                bprev
            }
            _ => gn(),
        };
        let g = jred.transpose() * &rlin;
        let step = match solve_subproblem(p, &w, &ns, &y, &bk, &g) {
            Ok(s) => s,
            Err(_) if restorations < 2 => {
                restorations += 1;
                bk = gn();
                match solve_subproblem(p, &w, &ns, &y, &bk, &g) {
                    Ok(s) => s,
                    Err(_) => QpStep {
                        du: DVector::zeros(2 * n1),
                        slack: merit.soft_violation(&w),
                    },
                }
            }
            Err(_) => {
                status = SolveStatus::Infeasible;
                break;
            }
        };
        let du = step.du;
        let dy = &y + &ns.z * &du;
        let pfull = assemble(&dy, &du, n1);

        // Directional derivative of the merit along the step.
        let grad_dot = {
            let jr = p.residual_jacobian(&w, &lin);
            lin.r.dot(&(jr * &pfull))
        };
        let quad = du.dot(&(&bk * &du));
        let c1 = lin.c.lp_norm(1);
        let viol = merit.soft_violation(&w);
        let soft_change: f64 = step.slack.iter().zip(&viol).map(|(s, v)| s - v).sum();
        kkt = (&bk * &du).amax();
        let c_inf = lin.c.amax();
        let fval = lin.cost();
        if c_inf <= cfg.constraint_tol
            && (grad_dot.abs() + 0.5 * quad) <= cfg.optimality_tol * (1.0 + fval)
            && soft_change.abs() <= cfg.constraint_tol
        {
            status = SolveStatus::Converged;
            break;
        }
        let rho = cfg.bound_penalty;
        if c1 > 0.0 {
            // Large enough that the defect reduction pays for the model increase.
            let needed = (grad_dot + 0.5 * quad + rho * soft_change) / (0.5 * c1);
            if needed > mu {
                mu = needed * 1.1;
            }
        }
        let dphi = grad_dot - mu * c1 + rho * soft_change;
        let phi0 = merit.value(&lin, &w, mu);
        log::trace!(
            "sqp it={iterations} f={fval:.6e} |c|={c_inf:.2e} gp={grad_dot:.3e} quad={quad:.3e} soft={soft_change:.3e} mu={mu:.3e} dphi={dphi:.3e} |du|={:.3e} viol={:.3e}",
            du.amax(),
            viol.iter().sum::<f64>()
        );
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= 1e-4 {
            let wt = &w + &pfull * alpha;
            let lt = p.linearize(&wt);
            let phit = merit.value(&lt, &wt, mu);
            if phit.is_finite() && phit <= phi0 + 1e-4 * alpha * dphi.min(0.0) {
                accepted = Some((wt, lt, phit));
                break;
            }
            if alpha == 1.0 && lt.c.iter().all(|v| v.is_finite()) {
                // Second-order correction against the Maratos effect.
                let corr = ns.particular(&lt.c);
                let ws = &wt + assemble(&corr, &DVector::zeros(2 * n1), n1);
                let ls = p.linearize(&ws);
                let phis = merit.value(&ls, &ws, mu);
                if phis.is_finite() && phis <= phi0 + 1e-4 * dphi.min(0.0) {
                    accepted = Some((ws, ls, phis));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((wn, ln, phin)) = accepted else {
            if cfg.hessian == HessianMode::Bfgs && restorations < 2 {
                // Fall back to a fresh Gauss-Newton model and retry.
                restorations += 1;
                continue;
            }
            break;
        };
        log::trace!("sqp accepted alpha={alpha} merit {phi0:.6e} -> {phin:.6e}");
        merit_steps.push((phi0, phin));
        stalled = if phi0 - phin < STALL_TOL * phi0.abs().max(1.0) {
            stalled + 1
        } else {
            0
        };
        let s = (rates_of(&wn, n1) - rates_of(&w, n1)).clone_owned();
        pending = Some((s, reduced_grad));
        b = Some(bk);
        w = wn;
        lin = ln;
        if stalled >= STALL_ITERATIONS {
            break;
        }
    }

    let cost = lin.cost();
    let constraint_violation = lin.c.amax();
    let bound_violation = p.bound_violation(&w).iter().fold(0.0f64, |m, v| m.max(*v));
    if status == SolveStatus::MaxIter && !constraint_violation.is_finite() {
        status = SolveStatus::Infeasible;
    }
    let first_input = first_input(p, &w);
    Ok(OcpSolution {
        tr: p.tr.clone(),
        horizon: p.horizon.clone(),
        w,
        status,
        iterations,
        cost,
        kkt_residual: kkt,
        constraint_violation,
        bound_violation,
        first_input,
        merit_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flight_model::trim::solve_trim;
    use crate::flight_model::{AircraftParams, EffortKind};
    use crate::nmpc::ocp::{build_ocp, InitialCondition, RefPoint};
    use crate::nmpc::NmpcConfig;
    use rand::{Rng, SeedableRng};

    fn problem(degree: usize, altitude_ref: f64, thrust_bound: f64) -> OcpProblem {
        let p = AircraftParams::default();
        let trim = solve_trim(20.0, 0.0, EffortKind::Thrust, -100.0, &p).unwrap();
        let config = NmpcConfig {
            degree,
            ..NmpcConfig::thrust()
        };
        let tr = Transcription::new(degree).unwrap();
        let reference = vec![
            RefPoint {
                altitude: altitude_ref,
                airspeed: 20.0,
                v_d: 0.0,
            };
            degree + 1
        ];
        let ic = InitialCondition {
            state: trim.state,
            effort: trim.effort,
            elevator: trim.elevator,
        };
        build_ocp(tr, 0.0, ic, reference, &config, Some(thrust_bound), &p).unwrap()
    }

    fn perturbed(p: &OcpProblem, rng: &mut impl Rng) -> DVector<f64> {
        let mut w = p.constant_guess();
        for j in 1..p.nodes() {
            for (v, s) in [
                (0, 1.0),
                (1, 0.5),
                (2, 0.5),
                (3, 0.02),
                (4, 0.05),
                (5, 3.0),
                (6, 0.02),
                (7, 5.0),
                (8, 0.1),
            ] {
                w[idx(j, v)] += rng.random_range(-s..s);
            }
        }
        w
    }

    #[test]
    fn null_space_step_is_first_order_exact() {
        let p = problem(12, 100.0, 70.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let w = perturbed(&p, &mut rng);
        let lin = p.linearize(&w);
        let ns = NullSpace::new(&p, &lin).unwrap();
        let y = ns.particular(&lin.c);
        let du = DVector::from_fn(
            2 * p.nodes(),
            |i, _| if i % 2 == 0 { 2.0 } else { 0.03 } * ((i as f64).sin()),
        );
        for eps in [1e-2, 1e-3] {
            let step = assemble(&(&y * eps + &ns.z * &du * eps), &(&du * eps), p.nodes());
            let c_new = p.constraints(&(&w + step));
            // Linear model predicts (1 - eps) c; the remainder is second order.
            let rem = (&c_new - &lin.c * (1.0 - eps)).amax();
            assert!(
                rem < 50.0 * eps * eps * (1.0 + lin.c.amax()),
                "eps {eps}: remainder {rem}"
            );
        }
    }

    #[test]
    fn reduced_jacobian_matches_full_space() {
        let p = problem(10, 110.0, 70.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let w = perturbed(&p, &mut rng);
        let lin = p.linearize(&w);
        let ns = NullSpace::new(&p, &lin).unwrap();
        let y = ns.particular(&lin.c);
        let (jred, rlin) = reduced_residuals(&p, &w, &lin, &ns, &y);
        let jr = p.residual_jacobian(&w, &lin);
        let du = DVector::from_fn(2 * p.nodes(), |i, _| (i as f64 * 0.7).cos());
        let full = assemble(&(&y + &ns.z * &du), &du, p.nodes());
        let a = &lin.r + &jr * full;
        let b = rlin + jred * du;
        assert!((a - b).amax() < 1e-9);
    }

    #[test]
    fn trim_fixed_point() {
        let p = problem(50, 100.0, 70.0);
        let s = solve_ocp(&p, None).unwrap();
        assert_eq!(s.status, SolveStatus::Converged);
        assert!(s.iterations <= 2);
        assert!((s.first_input.effort() - p.initial.effort).abs() < 1e-3);
        assert!((s.first_input.elevator() - p.initial.elevator).abs() < 1e-3);
    }
}
