//! Regression scores: R², adjusted R², MSE, RMSE, MAE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub r2: f64,
    pub adj_r2: f64,
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub n: usize,
    pub k: usize,
}

fn check_pair(y: &[f64], yhat: &[f64], min_len: usize) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: yhat.len(),
        });
    }
    if y.len() < min_len {
        return Err(Error::EmptyInput("metric input"));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn ssr(y: &[f64], yhat: &[f64]) -> f64 {
    y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn r_squared(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat, 2)?;
    let m = mean(y);
    let ssm: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    if ssm == 0.0 {
        return Err(Error::UndefinedMetric("R² of a constant target"));
    }
    Ok(1.0 - ssr(y, yhat) / ssm)
}

pub fn adjusted_r_squared(r2: f64, n: usize, k: usize) -> Result<f64> {
    if n <= k + 1 {
        return Err(Error::UndefinedMetric("adjusted R² needs n > k + 1"));
    }
    if k == 0 {
        return Ok(r2);
    }
    Ok(1.0 - (1.0 - r2) * (n - 1) as f64 / (n - k - 1) as f64)
}

pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat, 1)?;
    Ok(ssr(y, yhat) / y.len() as f64)
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    mse(y, yhat).map(f64::sqrt)
}

pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat, 1)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// All five scores. `k` is the number of feature columns the model saw.
pub fn full_report(y: &[f64], yhat: &[f64], k: usize) -> Result<MetricReport> {
    let r2 = r_squared(y, yhat)?;
    let mse = mse(y, yhat)?;
    Ok(MetricReport {
        r2,
        adj_r2: adjusted_r_squared(r2, y.len(), k)?,
        mse,
        rmse: mse.sqrt(),
        mae: mae(y, yhat)?,
        n: y.len(),
        k,
    })
}
