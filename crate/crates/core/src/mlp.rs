//! Fully connected regression network trained full-batch.
//!
//! Loss: (1/n) Σ ½(yᵢ − ŷᵢ)² + (α/2) Σ‖W‖²_F, biases unpenalized.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{check_finite, Matrix};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Logistic,
    Relu,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Logistic => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation value `a = φ(z)`.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Logistic => a * (1.0 - a),
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Gradient descent with Armijo backtracking and an adaptive step.
    Gd,
    /// Limited-memory BFGS with Armijo backtracking.
    Lbfgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
    pub alpha: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Stop once one iteration lowers the loss by less than this.
    pub tol: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![50],
            activation: Activation::Tanh,
            alpha: 1e-4,
            max_iter: 500,
            seed: 0,
            optimizer: Optimizer::Gd,
            tol: 1e-9,
        }
    }
}

impl MlpParams {
    pub fn check(&self) -> Result<()> {
        if self.hidden_sizes.contains(&0) {
            return Err(Error::InvalidParam("hidden layer sizes must be positive".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParam("alpha must be non-negative".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParam("tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// Weights are row-major `n_out × n_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub activation: Activation,
    pub params: MlpParams,
    pub loss_trace: Vec<f64>,
    pub converged: bool,
}

/// Layer shapes `(n_in, n_out)` for a network on `d` inputs.
pub fn layer_shapes(d: usize, hidden: &[usize]) -> Vec<(usize, usize)> {
    let mut sizes = vec![d];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    sizes.windows(2).map(|w| (w[0], w[1])).collect()
}

pub fn n_params(shapes: &[(usize, usize)]) -> usize {
    shapes.iter().map(|(i, o)| i * o + o).sum()
}

/// Packs layers into one vector: per layer, weights then biases.
pub fn flatten(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(&l.weights);
        out.extend_from_slice(&l.biases);
    }
    out
}

pub fn unflatten(shapes: &[(usize, usize)], theta: &[f64]) -> Vec<Layer> {
    let mut at = 0;
    shapes
        .iter()
        .map(|&(n_in, n_out)| {
            let w = theta[at..at + n_in * n_out].to_vec();
            at += n_in * n_out;
            let b = theta[at..at + n_out].to_vec();
            at += n_out;
            Layer {
                n_in,
                n_out,
                weights: w,
                biases: b,
            }
        })
        .collect()
}

/// Pre-activation `A · Wᵀ + b` for a row-major weight block.
fn affine(a: &DMatrix<f64>, w: &[f64], b: &[f64], n_in: usize, n_out: usize) -> DMatrix<f64> {
    // Row-major n_out × n_in is column-major n_in × n_out, i.e. Wᵀ.
    let wt = DMatrix::from_column_slice(n_in, n_out, w);
    let mut z = a * wt;
    for (j, mut col) in z.column_iter_mut().enumerate() {
        col.add_scalar_mut(b[j]);
    }
    z
}

/// Batch forward pass; returns every layer's output, input first.
fn forward_all(shapes: &[(usize, usize)], theta: &[f64], x: &DMatrix<f64>, act: Activation) -> Vec<DMatrix<f64>> {
    let mut outs = vec![x.clone()];
    let mut at = 0;
    let last = shapes.len() - 1;
    for (l, &(n_in, n_out)) in shapes.iter().enumerate() {
        let w = &theta[at..at + n_in * n_out];
        let b = &theta[at + n_in * n_out..at + n_in * n_out + n_out];
        at += n_in * n_out + n_out;
        let mut z = affine(outs.last().unwrap(), w, b, n_in, n_out);
        if l < last {
            z.apply(|v| *v = act.apply(*v));
        }
        outs.push(z);
    }
    outs
}

fn penalty(shapes: &[(usize, usize)], theta: &[f64], alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let mut at = 0;
    let mut s = 0.0;
    for &(n_in, n_out) in shapes {
        s += theta[at..at + n_in * n_out].iter().map(|w| w * w).sum::<f64>();
        at += n_in * n_out + n_out;
    }
    0.5 * alpha * s
}

/// Training objective for a given parameter vector.
pub struct Objective<'a> {
    pub shapes: Vec<(usize, usize)>,
    pub x: DMatrix<f64>,
    pub y: &'a [f64],
    pub alpha: f64,
    pub activation: Activation,
}

impl<'a> Objective<'a> {
    pub fn new(x: &Matrix, y: &'a [f64], hidden: &[usize], alpha: f64, activation: Activation) -> Self {
        Self {
            shapes: layer_shapes(x.ncols(), hidden),
            x: x.to_dmatrix(),
            y,
            alpha,
            activation,
        }
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        let outs = forward_all(&self.shapes, theta, &self.x, self.activation);
        let yhat = outs.last().unwrap();
        let n = self.y.len() as f64;
        let data: f64 = yhat.iter().zip(self.y).map(|(p, t)| 0.5 * (p - t) * (p - t)).sum::<f64>() / n;
        data + penalty(&self.shapes, theta, self.alpha)
    }

    pub fn loss_and_gradient(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let outs = forward_all(&self.shapes, theta, &self.x, self.activation);
        let n = self.y.len() as f64;
        let yhat = outs.last().unwrap();
        let mut delta = DMatrix::from_fn(self.y.len(), 1, |i, _| (yhat[(i, 0)] - self.y[i]) / n);
        let data: f64 = yhat.iter().zip(self.y).map(|(p, t)| 0.5 * (p - t) * (p - t)).sum::<f64>() / n;
        let loss = data + penalty(&self.shapes, theta, self.alpha);

        let mut grad = vec![0.0; theta.len()];
        let mut offsets = Vec::with_capacity(self.shapes.len());
        let mut at = 0;
        for &(n_in, n_out) in &self.shapes {
            offsets.push(at);
            at += n_in * n_out + n_out;
        }
        for l in (0..self.shapes.len()).rev() {
            let (n_in, n_out) = self.shapes[l];
            let at = offsets[l];
            let a_prev = &outs[l];
            // dWᵀ = A_prevᵀ δ, stored column-major n_in × n_out = row-major W.
            let gwt = a_prev.transpose() * &delta;
            let w = &theta[at..at + n_in * n_out];
            for (k, (g, wv)) in gwt.as_slice().iter().zip(w).enumerate() {
                grad[at + k] = g + self.alpha * wv;
            }
            for j in 0..n_out {
                grad[at + n_in * n_out + j] = delta.column(j).sum();
            }
            if l > 0 {
                let wt = DMatrix::from_column_slice(n_in, n_out, w);
                let mut back = &delta * wt.transpose();
                let act = self.activation;
                back.zip_apply(a_prev, |d, a| *d *= act.derivative_from_output(a));
                delta = back;
            }
        }
        (loss, grad)
    }
}

/// Uniform ±√(6/(fan_in+fan_out)) weights, zero biases.
pub fn init_params<R: Rng>(shapes: &[(usize, usize)], rng: &mut R) -> Vec<f64> {
    let mut theta = Vec::with_capacity(n_params(shapes));
    for &(n_in, n_out) in shapes {
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        for _ in 0..n_in * n_out {
            theta.push(rng.gen_range(-limit..=limit));
        }
        theta.extend(std::iter::repeat_n(0.0, n_out));
    }
    theta
}

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACK: usize = 60;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Armijo backtracking along `dir` from `theta`. Returns the accepted point
/// and its loss, or `None` when no step decreases the loss enough.
fn backtrack(obj: &Objective, theta: &[f64], loss: f64, slope: f64, dir: &[f64], step: &mut f64) -> Option<(Vec<f64>, f64)> {
    let mut trial = vec![0.0; theta.len()];
    for _ in 0..MAX_BACKTRACK {
        for ((t, th), d) in trial.iter_mut().zip(theta).zip(dir) {
            *t = th + *step * d;
        }
        let l = obj.loss(&trial);
        if l.is_finite() && l <= loss + ARMIJO_C * *step * slope {
            return Some((trial, l));
        }
        *step *= 0.5;
    }
    None
}

struct Run {
    theta: Vec<f64>,
    trace: Vec<f64>,
    converged: bool,
}

fn run_gd(obj: &Objective, mut theta: Vec<f64>, params: &MlpParams) -> Run {
    let (mut loss, mut grad) = obj.loss_and_gradient(&theta);
    let mut trace = vec![loss];
    let mut step = 1.0;
    let mut converged = false;
    for _ in 0..params.max_iter {
        let gg = dot(&grad, &grad);
        if gg == 0.0 {
            converged = true;
            break;
        }
        let dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        let Some((next, l)) = backtrack(obj, &theta, loss, -gg, &dir, &mut step) else {
            converged = true;
            break;
        };
        let improvement = loss - l;
        theta = next;
        let (l2, g2) = obj.loss_and_gradient(&theta);
        loss = l2;
        grad = g2;
        trace.push(loss);
        step *= 2.0;
        if improvement < params.tol {
            converged = true;
            break;
        }
    }
    Run { theta, trace, converged }
}

fn run_lbfgs(obj: &Objective, mut theta: Vec<f64>, params: &MlpParams) -> Run {
    const M: usize = 10;
    let (mut loss, mut grad) = obj.loss_and_gradient(&theta);
    let mut trace = vec![loss];
    let mut hist: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = std::collections::VecDeque::new();
    let mut converged = false;
    for _ in 0..params.max_iter {
        // Two-loop recursion.
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qv, yv)| *qv -= a * yv);
            alphas.push(a);
        }
        let scale = hist
            .back()
            .map(|(s, y, _)| dot(s, y) / dot(y, y))
            .unwrap_or_else(|| 1.0 / dot(&grad, &grad).sqrt().max(1.0));
        q.iter_mut().for_each(|v| *v *= scale);
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qv, sv)| *qv += (a - b) * sv);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&grad, &dir);
        if !(slope < 0.0) {
            hist.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope = -dot(&grad, &grad);
            if slope == 0.0 {
                converged = true;
                break;
            }
        }
        let mut step = 1.0;
        let Some((next, l)) = backtrack(obj, &theta, loss, slope, &dir, &mut step) else {
            converged = true;
            break;
        };
        let improvement = loss - l;
        let (l2, g2) = obj.loss_and_gradient(&next);
        let s: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g2.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            if hist.len() == M {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        theta = next;
        loss = l2;
        grad = g2;
        trace.push(loss);
        if improvement < params.tol {
            converged = true;
            break;
        }
    }
    Run { theta, trace, converged }
}

/// Fits on pre-scaled inputs. Rows are put in a canonical order first so the
/// fit does not depend on how the caller ordered them.
pub fn fit_mlp(x: &Matrix, y: &[f64], params: &MlpParams) -> Result<MlpModel> {
    params.check()?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("mlp training rows"));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("feature matrix"));
    }
    check_finite(y, "target")?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b))
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(y[a].total_cmp(&y[b]))
    });
    let xs = x.select_rows(&order);
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();

    let obj = Objective::new(&xs, &ys, &params.hidden_sizes, params.alpha, params.activation);
    let mut theta = init_params(&obj.shapes, &mut rng::stream(params.seed, "mlp", 0));
    // Start the output bias at the target mean.
    let last = theta.len() - 1;
    theta[last] = ys.iter().sum::<f64>() / n as f64;

    let first = obj.loss(&theta);
    if !first.is_finite() {
        return Err(Error::Divergence { trace: vec![first] });
    }
    let run = match params.optimizer {
        Optimizer::Gd => run_gd(&obj, theta, params),
        Optimizer::Lbfgs => run_lbfgs(&obj, theta, params),
    };
    if run.theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { trace: run.trace });
    }
    Ok(MlpModel {
        layers: unflatten(&obj.shapes, &run.theta),
        activation: params.activation,
        params: params.clone(),
        loss_trace: run.trace,
        converged: run.converged,
    })
}

impl MlpModel {
    pub fn n_features(&self) -> usize {
        self.layers.first().map_or(0, |l| l.n_in)
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.n_in, l.n_out)).collect()
    }

    /// Single-row forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z: Vec<f64> = (0..layer.n_out)
                .map(|o| {
                    let w = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                    dot(w, &a) + layer.biases[o]
                })
                .collect();
            if l < last {
                z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            a = z;
        }
        Ok(a[0])
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: x.ncols(),
            });
        }
        if x.nrows() == 0 {
            return Ok(Vec::new());
        }
        let theta = flatten(&self.layers);
        let outs = forward_all(&self.shapes(), &theta, &x.to_dmatrix(), self.activation);
        Ok(outs.last().unwrap().iter().copied().collect())
    }
}
