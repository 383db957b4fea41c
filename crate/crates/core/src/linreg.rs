//! Ordinary least squares with an intercept.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{check_finite, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub fit_intercept: bool,
}

impl Default for LinearParams {
    fn default() -> Self {
        Self { fit_intercept: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

/// Least-squares fit. Householder QR on the centered problem, falling back to
/// a truncated SVD (minimum-norm solution) when R is numerically singular.
pub fn fit_linear(x: &Matrix, y: &[f64], params: &LinearParams) -> Result<LinearModel> {
    let (n, d) = (x.nrows(), x.ncols());
    if n == 0 {
        return Err(Error::EmptyInput("linear regression input"));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("feature matrix"));
    }
    check_finite(y, "target")?;

    let (xm, ym) = if params.fit_intercept {
        let mut xm = vec![0.0; d];
        for row in x.rows_iter() {
            for (m, v) in xm.iter_mut().zip(row) {
                *m += v;
            }
        }
        xm.iter_mut().for_each(|m| *m /= n as f64);
        (xm, y.iter().sum::<f64>() / n as f64)
    } else {
        (vec![0.0; d], 0.0)
    };
    if d == 0 {
        return Ok(LinearModel {
            intercept: ym,
            coefficients: Vec::new(),
        });
    }

    let a = DMatrix::from_fn(n, d, |i, j| x.get(i, j) - xm[j]);
    let b = DVector::from_iterator(n, y.iter().map(|v| v - ym));
    let beta = solve_least_squares(a, b);
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = if params.fit_intercept {
        ym - xm.iter().zip(&coefficients).map(|(m, c)| m * c).sum::<f64>()
    } else {
        0.0
    };
    let model = LinearModel {
        intercept,
        coefficients,
    };
    if !model.intercept.is_finite() || model.coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("linear coefficients"));
    }
    Ok(model)
}

fn solve_least_squares(a: DMatrix<f64>, b: DVector<f64>) -> DVector<f64> {
    let (n, d) = a.shape();
    if n >= d {
        let qr = a.clone().qr();
        let r = qr.r();
        let diag: Vec<f64> = (0..d).map(|i| r[(i, i)].abs()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let tol = (n.max(d) as f64) * f64::EPSILON;
        if max > 0.0 && min > tol * max {
            let qtb = qr.q().transpose() * &b;
            if let Some(beta) = r.solve_upper_triangular(&qtb) {
                return beta;
            }
        }
    }
    min_norm_svd(a, b)
}

fn min_norm_svd(a: DMatrix<f64>, b: DVector<f64>) -> DVector<f64> {
    let (n, d) = a.shape();
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return DVector::zeros(d);
    }
    let eps = (n.max(d) as f64) * smax * f64::EPSILON;
    svd.solve(&b, eps).expect("both singular vector sets computed")
}

impl LinearModel {
    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                found: x.len(),
            });
        }
        Ok(self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.rows_iter().map(|r| self.predict_row(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let m = fit_linear(&x, &[1.0, 3.0, 5.0], &LinearParams::default()).unwrap();
        assert!((m.intercept - 1.0).abs() < 1e-12);
        assert!((m.coefficients[0] - 2.0).abs() < 1e-12);
        let p = m.predict(&x).unwrap();
        for (a, b) in p.iter().zip([1.0, 3.0, 5.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_target_gives_zero_slope() {
        let x = Matrix::from_rows(&[[1.0, 5.0], [2.0, -1.0], [4.0, 0.5], [3.0, 3.0]]).unwrap();
        let m = fit_linear(&x, &[7.0; 4], &LinearParams::default()).unwrap();
        assert!((m.intercept - 7.0).abs() < 1e-12);
        assert!(m.coefficients.iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn predict_arithmetic() {
        let m = LinearModel {
            intercept: 1.0,
            coefficients: vec![2.0],
        };
        assert_eq!(m.predict_row(&[3.0]).unwrap(), 7.0);
        assert!(m.predict_row(&[3.0, 1.0]).is_err());
    }

    #[test]
    fn underdetermined_uses_min_norm() {
        // Two identical columns: the min-norm split puts half the slope on each.
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).unwrap();
        let m = fit_linear(&x, &[0.0, 2.0, 4.0], &LinearParams::default()).unwrap();
        assert!((m.coefficients[0] - 1.0).abs() < 1e-10);
        assert!((m.coefficients[1] - 1.0).abs() < 1e-10);
    }
}
