use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-column standardization with population standard deviation.
/// Constant columns store std 1 and map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &Matrix) -> Result<Scaler> {
        let (n, d) = (x.nrows(), x.ncols());
        if n == 0 {
            return Err(Error::EmptyInput("scaler input"));
        }
        let mut means = vec![0.0; d];
        for row in x.rows_iter() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n as f64);
        let mut vars = vec![0.0; d];
        for row in x.rows_iter() {
            for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stds = vars
            .into_iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Scaler { means, stds })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        self.map(x, |v, m, s| (v - m) / s)
    }

    pub fn inverse_transform(&self, x: &Matrix) -> Result<Matrix> {
        self.map(x, |v, m, s| v * s + m)
    }

    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = (row[j] - self.means[j]) / self.stds[j];
        }
    }

    fn map(&self, x: &Matrix, f: impl Fn(f64, f64, f64) -> f64) -> Result<Matrix> {
        if x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.ncols(),
            });
        }
        let mut out = x.clone();
        for i in 0..out.nrows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = f(*v, self.means[j], self.stds[j]);
            }
        }
        Ok(out)
    }
}
