//! Dense strictly convex QP by the Goldfarb-Idnani dual active-set method:
//!
//! ```text
//! minimize ½ xᵀ G x + aᵀ x   subject to   C x ≥ b
//! ```
//!
//! `G` must be positive definite. The factorisation `Jᵀ N = [R; 0]` with
//! `J = L⁻ᵀ Q` is updated by Givens rotations as constraints enter and leave.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub enum QpError {
    NotPositiveDefinite,
    Infeasible,
    MaxIterations,
    Dimension,
}

impl std::fmt::Display for QpError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            QpError::NotPositiveDefinite => "QP Hessian is not positive definite",
            QpError::Infeasible => "QP constraints are infeasible",
            QpError::MaxIterations => "QP active-set iteration limit reached",
            QpError::Dimension => "QP dimensions are inconsistent",
        };
        f.write_str(s)
    }
}

impl std::error::Error for QpError {}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Multiplier of every constraint row (zero when inactive).
    pub multipliers: DVector<f64>,
    pub active: Vec<usize>,
    pub iterations: usize,
}

const EPS: f64 = 1e-12;

struct Factor {
    n: usize,
    q: usize,
    j: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl Factor {
    fn givens(a: f64, b: f64) -> (f64, f64, f64) {
        let h = a.hypot(b);
        if h == 0.0 {
            (1.0, 0.0, 0.0)
        } else {
            (a / h, b / h, h)
        }
    }

    fn rotate_j(&mut self, c1: usize, c2: usize, c: f64, s: f64) {
        for i in 0..self.n {
            let (a, b) = (self.j[(i, c1)], self.j[(i, c2)]);
            self.j[(i, c1)] = c * a + s * b;
            self.j[(i, c2)] = -s * a + c * b;
        }
    }

    /// Append a constraint whose transformed normal is `d = Jᵀ n`.
    /// Returns false if it is linearly dependent on the active set.
    fn add(&mut self, d: &mut DVector<f64>) -> bool {
        let q = self.q;
        for k in (q + 1..self.n).rev() {
            if d[k] == 0.0 {
                continue;
            }
            let (c, s, h) = Self::givens(d[k - 1], d[k]);
            d[k - 1] = h;
            d[k] = 0.0;
            self.rotate_j(k - 1, k, c, s);
        }
        if q >= self.n || d[q].abs() <= EPS * (1.0 + d.amax()) {
            return false;
        }
        for i in 0..=q {
            self.r[(i, q)] = d[i];
        }
        self.q += 1;
        true
    }

    /// Remove active constraint at position `k` of the active list.
    fn drop(&mut self, k: usize) {
        let q = self.q;
        for col in k..q - 1 {
            for i in 0..q {
                self.r[(i, col)] = self.r[(i, col + 1)];
            }
        }
        for i in 0..q {
            self.r[(i, q - 1)] = 0.0;
        }
        for jj in k..q - 1 {
            let (c, s, h) = Self::givens(self.r[(jj, jj)], self.r[(jj + 1, jj)]);
            self.r[(jj, jj)] = h;
            self.r[(jj + 1, jj)] = 0.0;
            for l in jj + 1..q - 1 {
                let (a, b) = (self.r[(jj, l)], self.r[(jj + 1, l)]);
                self.r[(jj, l)] = c * a + s * b;
                self.r[(jj + 1, l)] = -s * a + c * b;
            }
            self.rotate_j(jj, jj + 1, c, s);
        }
        self.q -= 1;
    }

    /// Solve `R[..q, ..q] r = d[..q]`.
    fn back_substitute(&self, d: &DVector<f64>) -> DVector<f64> {
        let q = self.q;
        let mut r = DVector::zeros(q);
        for i in (0..q).rev() {
            let mut acc = d[i];
            for k in i + 1..q {
                acc -= self.r[(i, k)] * r[k];
            }
            r[i] = acc / self.r[(i, i)];
        }
        r
    }
}

/// Solve the QP. `c` is `m × n`, `b` has length `m`.
pub fn solve_qp(
    g: &DMatrix<f64>,
    a: &DVector<f64>,
    c: &DMatrix<f64>,
    b: &DVector<f64>,
    max_iter: usize,
) -> Result<QpSolution, QpError> {
    let n = g.nrows();
    let m = c.nrows();
    if g.ncols() != n || a.len() != n || (m > 0 && c.ncols() != n) || b.len() != m {
        return Err(QpError::Dimension);
    }
    let chol = g.clone().cholesky().ok_or(QpError::NotPositiveDefinite)?;
    // J = L⁻ᵀ
    let l_inv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or(QpError::NotPositiveDefinite)?;
    let mut f = Factor {
        n,
        q: 0,
        j: l_inv.transpose(),
        r: DMatrix::zeros(n, n),
    };
    let mut x = -chol.solve(a);
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let norms: Vec<f64> = (0..m).map(|i| c.row(i).norm().max(EPS)).collect();
    let mut iterations = 0;

    loop {
        // Most violated constraint, scaled by its row norm.
        let slack = c * &x - b;
        let mut p = None;
        let mut worst = 0.0;
        for i in 0..m {
            if active.contains(&i) {
                continue;
            }
            let tol = 1e-10 * (1.0 + b[i].abs());
            let s = slack[i] / norms[i];
            if slack[i] < -tol && s < worst {
                worst = s;
                p = Some(i);
            }
        }
        let Some(p) = p else { break };
        let np: DVector<f64> = c.row(p).transpose();
        let mut u_new = u.clone();
        u_new.push(0.0);
        let mut s_p = slack[p];

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(QpError::MaxIterations);
            }
            let mut d = f.j.transpose() * &np;
            let q = f.q;
            let mut z = DVector::zeros(n);
            for k in q..n {
                z.axpy(d[k], &f.j.column(k), 1.0);
            }
            let r = f.back_substitute(&d);

            let mut t1 = f64::INFINITY;
            let mut drop_k = None;
            for k in 0..q {
                if r[k] > EPS {
                    let ratio = u_new[k] / r[k];
                    if ratio < t1 {
                        t1 = ratio;
                        drop_k = Some(k);
                    }
                }
            }
            let zn = z.dot(&np);
            let t2 = if z.amax() > EPS && zn > EPS {
                -s_p / zn
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(QpError::Infeasible);
            }
            for k in 0..q {
                u_new[k] -= t * r[k];
            }
            u_new[q] += t;
            if t2.is_finite() {
                x.axpy(t, &z, 1.0);
                s_p += t * zn;
            }
            if t == t2 {
                if !f.add(&mut d) {
                    return Err(QpError::Infeasible);
                }
                active.push(p);
                u = u_new;
                break;
            }
            let k = drop_k.expect("partial step implies a blocking constraint");
            f.drop(k);
            active.remove(k);
            u_new.remove(k);
        }
    }

    let mut multipliers = DVector::zeros(m);
    for (&i, &ui) in active.iter().zip(&u) {
        multipliers[i] = ui;
    }
    let objective = 0.5 * x.dot(&(g * &x)) + a.dot(&x);
    Ok(QpSolution {
        x,
        objective,
        multipliers,
        active,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn unconstrained_minimum() {
        let g = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let a = DVector::from_vec(vec![-1.0, -2.0]);
        let s = solve_qp(&g, &a, &DMatrix::zeros(0, 2), &DVector::zeros(0), 100).unwrap();
        let exact = g.clone().lu().solve(&(-&a)).unwrap();
        assert_relative_eq!(s.x, exact, epsilon = 1e-12);
    }

    #[test]
    fn textbook_problem() {
        // min x² + y² - 2x - 5y  s.t. x - 2y ≥ -2, -x - 2y ≥ -6, -x + 2y ≥ -2, x ≥ 0, y ≥ 0
        // (Nocedal & Wright example 16.4 in half-scaled form): solution (1.4, 1.7).
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let a = DVector::from_vec(vec![-2.0, -5.0]);
        let c = DMatrix::from_row_slice(5, 2, &[1.0, -2.0, -1.0, -2.0, -1.0, 2.0, 1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![-2.0, -6.0, -2.0, 0.0, 0.0]);
        let s = solve_qp(&g, &a, &c, &b, 100).unwrap();
        assert_relative_eq!(s.x[0], 1.4, epsilon = 1e-12);
        assert_relative_eq!(s.x[1], 1.7, epsilon = 1e-12);
        assert_eq!(s.active, vec![0]);
        assert_relative_eq!(s.multipliers[0], 0.8, epsilon = 1e-12);
    }

    #[test]
    fn detects_infeasibility() {
        let g = DMatrix::identity(1, 1);
        let c = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let b = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(
            solve_qp(&g, &DVector::zeros(1), &c, &b, 100).unwrap_err(),
            QpError::Infeasible
        );
    }

    #[test]
    fn rejects_indefinite_hessian() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let r = solve_qp(&g, &DVector::zeros(2), &DMatrix::zeros(0, 2), &DVector::zeros(0), 10);
        assert_eq!(r.unwrap_err(), QpError::NotPositiveDefinite);
    }

    fn kkt_residual(g: &DMatrix<f64>, a: &DVector<f64>, c: &DMatrix<f64>, b: &DVector<f64>, s: &QpSolution) -> f64 {
        let stationarity = (g * &s.x + a - c.transpose() * &s.multipliers).amax();
        let primal = (c * &s.x - b).iter().fold(0.0f64, |m, v| m.max(-v));
        let dual = s.multipliers.iter().fold(0.0f64, |m, v| m.max(-v));
        let comp = (c * &s.x - b)
            .iter()
            .zip(s.multipliers.iter())
            .fold(0.0f64, |m, (sl, l)| m.max((sl * l).abs()));
        stationarity.max(primal).max(dual).max(comp)
    }

    proptest! {
        #[test]
        fn random_box_problems_satisfy_kkt(
            seed in proptest::collection::vec(-1.0f64..1.0, 6 * 6 + 6 + 6),
            lo in -0.5f64..0.0, hi in 0.0f64..0.5,
        ) {
            let n = 6;
            let m_raw = DMatrix::from_row_slice(n, n, &seed[..n * n]);
            let g = &m_raw * m_raw.transpose() + DMatrix::identity(n, n) * 0.1;
            let a = DVector::from_row_slice(&seed[n * n..n * n + n]) * 5.0;
            let row = DVector::from_row_slice(&seed[n * n + n..]);
            // Box plus one general row.
            let mut c = DMatrix::zeros(2 * n + 1, n);
            let mut b = DVector::zeros(2 * n + 1);
            for i in 0..n {
                c[(2 * i, i)] = 1.0;
                b[2 * i] = lo;
                c[(2 * i + 1, i)] = -1.0;
                b[2 * i + 1] = -hi;
            }
            for k in 0..n {
                c[(2 * n, k)] = row[k];
            }
            b[2 * n] = -0.1;
            let s = solve_qp(&g, &a, &c, &b, 1000).unwrap();
            prop_assert!(kkt_residual(&g, &a, &c, &b, &s) < 1e-9, "kkt {}", kkt_residual(&g, &a, &c, &b, &s));
        }
    }
}
