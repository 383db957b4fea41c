//! ε-insensitive support vector regression, solved in the dual by SMO.
//!
//! The dual is written over 2n variables a = (α, α*) with labels
//! s = (+1…, −1…):
//!
//!   minimize ½ aᵀQa + pᵀa   s.t.  sᵀa = 0,  0 ≤ a ≤ C
//!
//! where Q_uv = s_u s_v K(x_u, x_v) and p = (ε − y, ε + y). Pairs are picked
//! by maximal violation for the first index and second-order gain for the
//! second. The regression function is Σ (α_i − α*_i) K(x_i, x) + b.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{check_finite, Matrix};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(u, v)| u * v).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    pub kernel: Kernel,
    pub tol: f64,
    /// One pass is n pair updates.
    pub max_passes: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            kernel: Kernel::Rbf { gamma: 0.1 },
            tol: 1e-3,
            max_passes: 200,
        }
    }
}

impl SvrParams {
    pub fn check(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParam("C must be positive".into()));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParam("epsilon must be non-negative".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParam("tol must be positive".into()));
        }
        if let Kernel::Rbf { gamma } = self.kernel {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(Error::InvalidParam("rbf gamma must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub support_rows: Matrix,
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub params: SvrParams,
    pub n_features: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Dual objective (maximization form) after each pass.
    pub objective_trace: Vec<f64>,
}

impl SvrModel {
    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let mut s = 0.0;
        for (sv, c) in self.support_rows.rows_iter().zip(&self.dual_coefs) {
            s += c * self.params.kernel.eval(sv, x);
        }
        Ok(s + self.bias)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.rows_iter().map(|r| self.predict_row(r)).collect()
    }

    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }
}

/// Full solver output, including zero coefficients.
#[derive(Debug, Clone)]
pub struct SvrSolution {
    /// α_i − α*_i for every training row.
    pub coefs: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
}

/// Dual objective in maximization form for coefficients β = α − α*
/// (assuming α·α* = 0, which holds at every SMO iterate).
pub fn dual_objective(k: &[f64], y: &[f64], epsilon: f64, coefs: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += k[i * n + j] * coefs[j];
        }
        quad += coefs[i] * row;
    }
    let lin: f64 = coefs.iter().zip(y).map(|(b, v)| b * v - epsilon * b.abs()).sum();
    lin - 0.5 * quad
}

pub fn kernel_matrix(x: &Matrix, kernel: &Kernel) -> Vec<f64> {
    let n = x.nrows();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(x.row(i), x.row(j));
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

pub fn solve_dual(k: &[f64], y: &[f64], params: &SvrParams) -> SvrSolution {
    let n = y.len();
    let m = 2 * n;
    let c = params.c;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let kd = |t: usize, u: usize| k[(t % n) * n + (u % n)];
    let p: Vec<f64> = (0..m)
        .map(|t| if t < n { params.epsilon - y[t] } else { params.epsilon + y[t - n] })
        .collect();
    let mut a = vec![0.0; m];
    let mut g = p.clone();
    let objective = |a: &[f64], g: &[f64]| -> f64 {
        -0.5 * a.iter().zip(g).zip(&p).map(|((a, g), p)| a * (g + p)).sum::<f64>()
    };
    let is_up = |t: usize, a: &[f64]| if t < n { a[t] < c } else { a[t] > 0.0 };
    let is_low = |t: usize, a: &[f64]| if t < n { a[t] > 0.0 } else { a[t] < c };

    let max_iter = params.max_passes.saturating_mul(n.max(1));
    let mut trace = vec![objective(&a, &g)];
    let mut iter = 0;
    let mut converged = false;
    let mut u = vec![0.0; n];
    loop {
        // First index: maximal violation.
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..m {
            if is_up(t, &a) {
                let v = -sign(t) * g[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        // Second index: best second-order decrease among violating partners.
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..m {
            if !is_low(t, &a) {
                continue;
            }
            let v = -sign(t) * g[t];
            if v < gmin {
                gmin = v;
            }
            if i == usize::MAX {
                continue;
            }
            let b = gmax - v;
            if b > 0.0 {
                let mut quad = kd(i, i) + kd(t, t) - 2.0 * kd(i, t);
                if quad <= 0.0 {
                    quad = TAU;
                }
                let score = -(b * b) / quad;
                if score < best {
                    best = score;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < params.tol {
            converged = true;
            break;
        }
        if iter >= max_iter {
            break;
        }
        iter += 1;

        let (yi, yj) = (sign(i), sign(j));
        let qij = yi * yj * kd(i, j);
        let (old_i, old_j) = (a[i], a[j]);
        if yi != yj {
            let mut quad = kd(i, i) + kd(j, j) + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-g[i] - g[j]) / quad;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if diff > 0.0 {
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else if a[j] > c {
                a[j] = c;
                a[i] = c + diff;
            }
        } else {
            let mut quad = kd(i, i) + kd(j, j) - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (g[i] - g[j]) / quad;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
            } else if a[j] < 0.0 {
                a[j] = 0.0;
                a[i] = sum;
            }
            if sum > c {
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = sum;
            }
        }
        let di = (a[i] - old_i) * yi;
        let dj = (a[j] - old_j) * yj;
        let (ri, rj) = ((i % n) * n, (j % n) * n);
        for (v, uv) in u.iter_mut().enumerate() {
            *uv = di * k[ri + v] + dj * k[rj + v];
        }
        for v in 0..n {
            g[v] += u[v];
            g[v + n] -= u[v];
        }
        if iter % n.max(1) == 0 {
            trace.push(objective(&a, &g));
        }
    }
    if trace.len() == 1 || iter % n.max(1) != 0 {
        trace.push(objective(&a, &g));
    }

    // Bias from free variables, else the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..m {
        let yg = sign(t) * g[t];
        if a[t] >= c {
            if sign(t) < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if a[t] <= 0.0 {
            if sign(t) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    SvrSolution {
        coefs: (0..n).map(|t| a[t] - a[t + n]).collect(),
        bias: -rho,
        converged,
        iterations: iter,
        objective_trace: trace,
    }
}

/// Fits on pre-scaled inputs. Non-convergence is reported on the model, not
/// as an error.
pub fn fit_svr(x: &Matrix, y: &[f64], params: &SvrParams) -> Result<SvrModel> {
    params.check()?;
    let n = x.nrows();
    if n < 2 {
        return Err(Error::EmptyInput("svr needs at least two rows"));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("feature matrix"));
    }
    check_finite(y, "target")?;
    let k = kernel_matrix(x, &params.kernel);
    let sol = solve_dual(&k, y, params);
    let keep: Vec<usize> = (0..n).filter(|&i| sol.coefs[i] != 0.0).collect();
    Ok(SvrModel {
        support_rows: x.select_rows(&keep),
        dual_coefs: keep.iter().map(|&i| sol.coefs[i]).collect(),
        bias: sol.bias,
        params: *params,
        n_features: x.ncols(),
        converged: sol.converged,
        iterations: sol.iterations,
        objective_trace: sol.objective_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(c: f64, eps: f64) -> SvrParams {
        SvrParams {
            c,
            epsilon: eps,
            kernel: Kernel::Linear,
            tol: 1e-9,
            max_passes: 10_000,
        }
    }

    #[test]
    fn constant_target_needs_no_support_vectors() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let m = fit_svr(&x, &[3.0; 4], &linear(1.0, 0.1)).unwrap();
        assert!(m.dual_coefs.is_empty());
        assert!((m.predict_row(&[10.0]).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn wide_tube_gives_flat_function() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let y = [1.0, 2.0, 3.0];
        let m = fit_svr(&x, &y, &linear(1.0, 1.0)).unwrap();
        assert!(m.dual_coefs.is_empty());
        for v in [0.0, 1.0, 2.0] {
            let p = m.predict_row(&[v]).unwrap();
            assert!(y.iter().all(|t| (t - p).abs() <= 1.0 + 1e-9));
        }
    }

    #[test]
    fn two_point_analytic() {
        // c* = min(C, (|Δy| − 2ε) / |Δx|²), slope = c*·Δx.
        let x = Matrix::from_rows(&[[0.0], [2.0]]).unwrap();
        for (c, eps, y1) in [(10.0, 0.1, 1.0), (0.05, 0.1, 1.0), (1.0, 0.2, -3.0)] {
            let m = fit_svr(&x, &[0.0, y1], &linear(c, eps)).unwrap();
            let dy: f64 = y1;
            let cstar = ((dy.abs() - 2.0 * eps) / 4.0).min(c) * dy.signum();
            let slope = (m.predict_row(&[2.0]).unwrap() - m.predict_row(&[0.0]).unwrap()) / 2.0;
            assert!((slope - 2.0 * cstar).abs() < 1e-6, "slope {slope} vs {}", 2.0 * cstar);
            let s: f64 = m.dual_coefs.iter().sum();
            assert!(s.abs() < 1e-9);
        }
    }

    #[test]
    fn rbf_self_kernel_is_one() {
        let k = Kernel::Rbf { gamma: 0.3 };
        assert_eq!(k.eval(&[1.0, 2.0], &[1.0, 2.0]), 1.0);
    }

    #[test]
    fn objective_trace_non_decreasing() {
        let rows: Vec<[f64; 2]> = (0..30).map(|i| [(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] - r[1] + 0.1 * (r[0] * 9.0).sin()).collect();
        let m = fit_svr(&x, &y, &SvrParams { tol: 1e-6, ..Default::default() }).unwrap();
        assert!(m.converged);
        for w in m.objective_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }
}
