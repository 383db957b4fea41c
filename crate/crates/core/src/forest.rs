//! Bagged variance trees.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cart::{self, ColumnOrder, GrowthParams, TreeNode, VarianceCriterion};
use crate::error::{Error, Result};
use crate::matrix::{check_finite, Matrix};
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub growth: GrowthParams,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 200,
            growth: GrowthParams {
                max_depth: 8,
                min_samples_leaf: 1,
                max_features: Some(9),
                min_gain: 0.0,
            },
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub params: ForestParams,
    pub n_features: usize,
}

/// The random stream owned by tree `j`.
pub fn tree_rng(seed: u64, j: usize) -> StreamRng {
    rng::stream(seed, "forest", j as u64)
}

/// `n` draws with replacement from `0..n`.
pub fn bootstrap_rows<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

pub fn fit_forest(x: &Matrix, y: &[f64], params: &ForestParams) -> Result<ForestModel> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("forest training rows"));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if params.n_estimators == 0 {
        return Err(Error::InvalidParam("n_estimators must be at least 1".into()));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("feature matrix"));
    }
    check_finite(y, "target")?;
    params.growth.check(x.ncols())?;

    let stats = cart::variance_stats(y);
    let all: Vec<usize> = (0..n).collect();
    let order = ColumnOrder::new(x);
    let mut trees = Vec::with_capacity(params.n_estimators);
    for j in 0..params.n_estimators {
        let mut r = tree_rng(params.seed, j);
        let rows = if params.bootstrap {
            bootstrap_rows(n, &mut r)
        } else {
            all.clone()
        };
        trees.push(cart::grow_with_order(x, &stats, &rows, &params.growth, &VarianceCriterion, &mut r, &order)?);
    }
    Ok(ForestModel {
        trees,
        params: *params,
        n_features: x.ncols(),
    })
}

impl ForestModel {
    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let mut sum = 0.0;
        for t in &self.trees {
            sum += cart::predict_tree(t, x)?;
        }
        Ok(sum / self.trees.len() as f64)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.rows_iter().map(|r| self.predict_row(r)).collect()
    }
}
