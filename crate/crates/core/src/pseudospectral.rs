//! Legendre-Gauss-Lobatto collocation: nodes, quadrature weights, the
//! spectral differentiation matrix, and barycentric interpolation on the nodes.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 200;
const NEWTON_MAX_ITER: usize = 100;

/// LGL grid of polynomial degree `degree` (that is, `degree + 1` nodes on [-1, 1]).
#[derive(Debug, Clone)]
pub struct CollocationGrid {
    degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    diff: DMatrix<f64>,
    bary: Vec<f64>,
}

/// Legendre polynomials P_{n-1}(x), P_n(x) by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut p_prev, mut p) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    (p_prev, p)
}

/// LGL grid for `1 <= degree <= MAX_DEGREE`.
pub fn lgl_grid(degree: usize) -> Result<CollocationGrid> {
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(Error::OutOfRange {
            what: "grid degree",
            value: degree as f64,
            min: 1.0,
            max: MAX_DEGREE as f64,
        });
    }
    let n = degree;
    let nf = n as f64;
    let mut nodes = vec![0.0; n + 1];
    // Interior nodes are roots of P'_N. Newton on (x P_N - P_{N-1}) / ((N+1) P_N)
    // from Chebyshev-Gauss-Lobatto guesses; only the lower half is iterated and
    // the upper half mirrored so the grid is exactly symmetric.
    nodes[0] = -1.0;
    nodes[n] = 1.0;
    for j in 1..=n / 2 {
        let mut x = -(std::f64::consts::PI * j as f64 / nf).cos();
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let (p_prev, p) = legendre_pair(n, x);
            let dx = (x * p - p_prev) / ((nf + 1.0) * p);
            x -= dx;
            if dx.abs() <= 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NodeConvergence { degree });
        }
        nodes[j] = x;
        nodes[n - j] = -x;
    }
    if n % 2 == 0 {
        nodes[n / 2] = 0.0;
    }

    let p_at: Vec<f64> = nodes.iter().map(|&x| legendre_pair(n, x).1).collect();
    let weights: Vec<f64> = p_at.iter().map(|p| 2.0 / (nf * (nf + 1.0) * p * p)).collect();

    let mut diff = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        let mut row_sum = 0.0;
        for j in 0..=n {
            if i != j {
                let d = p_at[i] / (p_at[j] * (nodes[i] - nodes[j]));
                diff[(i, j)] = d;
                row_sum += d;
            }
        }
        diff[(i, i)] = -row_sum;
    }

    let mut bary = vec![1.0; n + 1];
    for j in 0..=n {
        for k in 0..=n {
            if k != j {
                bary[j] /= nodes[j] - nodes[k];
            }
        }
    }
    let scale = bary.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    bary.iter_mut().for_each(|w| *w /= scale);

    Ok(CollocationGrid {
        degree,
        nodes,
        weights,
        diff,
        bary,
    })
}

impl CollocationGrid {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn diff_matrix(&self) -> &DMatrix<f64> {
        &self.diff
    }

    /// Value at `tau` of the degree-N interpolant through `values` at the nodes.
    pub fn interpolate(&self, values: &[f64], tau: f64) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&x, &w), &v) in self.nodes.iter().zip(&self.bary).zip(values) {
            let d = tau - x;
            if d == 0.0 {
                return v;
            }
            let t = w / d;
            num += t * v;
            den += t;
        }
        num / den
    }

    /// Affine map of the nodes onto `[t0, tf]`.
    pub fn map_to_horizon(&self, t0: f64, tf: f64) -> Result<Horizon> {
        if !(tf > t0) || !t0.is_finite() || !tf.is_finite() {
            return Err(Error::Config(format!("horizon end {tf} must exceed start {t0}")));
        }
        let scale = 0.5 * (tf - t0);
        let times = self.nodes.iter().map(|&tau| t0 + scale * (tau + 1.0)).collect();
        Ok(Horizon { times, scale, t0, tf })
    }
}

/// Node times for a concrete horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Horizon {
    pub times: Vec<f64>,
    /// `(tf - t0) / 2`, the Jacobian of the map from τ to t.
    pub scale: f64,
    pub t0: f64,
    pub tf: f64,
}

impl Horizon {
    /// Map a time back onto the reference interval.
    pub fn tau_of(&self, t: f64) -> f64 {
        (t - self.t0) / self.scale - 1.0
    }

    /// `∫ f dt` from node samples.
    pub fn integrate(&self, grid: &CollocationGrid, samples: &[f64]) -> f64 {
        self.scale * grid.weights.iter().zip(samples).map(|(w, f)| w * f).sum::<f64>()
    }
}
