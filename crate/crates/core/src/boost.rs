//! Gradient-boosted trees on squared error with second-order leaf weights.
//!
//! With loss ½(y − ŷ)² every row has g = ŷ − y and h = 1. A leaf holding
//! statistics (G, H) takes weight −G/(H + λ), and splitting it gains
//! ½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)] − γ.

use serde::{Deserialize, Serialize};

use crate::cart::{self, ColumnOrder, GradStats, GrowthParams, SplitCriterion, TreeNode};
use crate::error::{Error, Result};
use crate::matrix::{check_finite, Matrix};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub subsample: f64,
    /// Initial prediction; the training-target mean when `None`.
    pub base_score: Option<f64>,
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            n_rounds: 200,
            learning_rate: 0.1,
            lambda: 1.0,
            gamma: 0.0,
            max_depth: 6,
            min_child_weight: 1.0,
            subsample: 1.0,
            base_score: None,
            seed: 0,
        }
    }
}

impl BoostParams {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda must be non-negative");
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return bad("gamma must be non-negative");
        }
        if !(self.min_child_weight >= 0.0) {
            return bad("min_child_weight must be non-negative");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must lie in (0, 1]");
        }
        if self.base_score.is_some_and(|b| !b.is_finite()) {
            return bad("base_score must be finite");
        }
        Ok(())
    }
}

pub fn leaf_weight(stats: GradStats, lambda: f64) -> Result<f64> {
    let denom = stats.h + lambda;
    if denom == 0.0 {
        return Err(Error::InvalidParam("leaf weight undefined for H + lambda = 0".into()));
    }
    Ok(-stats.g / denom)
}

pub fn split_gain(left: GradStats, right: GradStats, lambda: f64, gamma: f64) -> f64 {
    let score = |s: GradStats| s.g * s.g / (s.h + lambda);
    0.5 * (score(left) + score(right) - score(left + right)) - gamma
}

/// Split rule used inside the booster.
#[derive(Debug, Clone, Copy)]
pub struct GradientCriterion {
    pub lambda: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub min_child_weight: f64,
}

impl SplitCriterion for GradientCriterion {
    fn gain(&self, left: GradStats, right: GradStats) -> f64 {
        split_gain(left, right, self.lambda, self.gamma)
    }

    /// Already shrunk by the learning rate.
    fn leaf_value(&self, stats: GradStats) -> f64 {
        self.learning_rate * (-stats.g / (stats.h + self.lambda))
    }

    fn admissible(&self, left: GradStats, right: GradStats) -> bool {
        left.h >= self.min_child_weight && right.h >= self.min_child_weight
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub base_score: f64,
    pub trees: Vec<TreeNode>,
    pub params: BoostParams,
    pub importance_raw: Vec<f64>,
    /// Training MSE after each round.
    pub train_mse: Vec<f64>,
}

impl BoostModel {
    fn criterion(&self) -> GradientCriterion {
        GradientCriterion {
            lambda: self.params.lambda,
            gamma: self.params.gamma,
            learning_rate: self.params.learning_rate,
            min_child_weight: self.params.min_child_weight,
        }
    }

    pub fn n_features(&self) -> usize {
        self.importance_raw.len()
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        let mut p = self.base_score;
        for t in &self.trees {
            p += cart::predict_tree(t, x)?;
        }
        Ok(p)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.rows_iter().map(|r| self.predict_row(r)).collect()
    }

    /// Normalized gain importance; all zeros when no split was made.
    pub fn feature_importance(&self) -> Vec<f64> {
        let total: f64 = self.importance_raw.iter().sum();
        if total > 0.0 {
            self.importance_raw.iter().map(|v| v / total).collect()
        } else {
            vec![0.0; self.importance_raw.len()]
        }
    }

    /// Appends `rounds` trees, keeping every existing tree unchanged. Round
    /// `t` uses the random stream of global round index `t`, so splitting a
    /// fit into pieces reproduces the one-shot fit.
    pub fn continue_fit(&mut self, x: &Matrix, y: &[f64], rounds: usize) -> Result<Vec<f64>> {
        let n = x.nrows();
        check_xy(x, y)?;
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: x.ncols(),
            });
        }
        let mut pred = self.predict(x)?;
        let criterion = self.criterion();
        let growth = GrowthParams {
            max_depth: self.params.max_depth,
            min_samples_leaf: 1,
            max_features: None,
            min_gain: 0.0,
        };
        let m = if self.params.subsample < 1.0 {
            let m = (self.params.subsample * n as f64).round() as usize;
            if m == 0 {
                return Err(Error::InvalidParam(format!(
                    "subsample {} leaves no rows out of {n}",
                    self.params.subsample
                )));
            }
            m.min(n)
        } else {
            n
        };
        let order = ColumnOrder::new(x);
        let all: Vec<usize> = (0..n).collect();
        let mut stats = vec![GradStats::default(); n];
        for _ in 0..rounds {
            let t = self.trees.len();
            let mut r = rng::stream(self.params.seed, "boost", t as u64);
            let rows = if m < n {
                let mut s = rand::seq::index::sample(&mut r, n, m).into_vec();
                s.sort_unstable();
                s
            } else {
                all.clone()
            };
            for i in 0..n {
                stats[i] = GradStats::new(pred[i] - y[i], 1.0);
            }
            let tree = cart::grow_with_order(x, &stats, &rows, &growth, &criterion, &mut r, &order)?;
            tree.visit(&mut |node| {
                if let TreeNode::Split { feature, gain, .. } = node {
                    self.importance_raw[*feature] += gain;
                }
            });
            for i in 0..n {
                pred[i] += cart::predict_tree(&tree, x.row(i))?;
            }
            self.trees.push(tree);
            let mse = pred.iter().zip(y).map(|(p, v)| (p - v) * (p - v)).sum::<f64>() / n as f64;
            if !mse.is_finite() {
                return Err(Error::Divergence {
                    trace: self.train_mse.clone(),
                });
            }
            self.train_mse.push(mse);
        }
        Ok(pred)
    }
}

fn check_xy(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::EmptyInput("boost training rows"));
    }
    if y.len() != x.nrows() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: y.len(),
        });
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("feature matrix"));
    }
    check_finite(y, "target")
}

/// Untrained model holding only the base score.
pub fn init_boost(x: &Matrix, y: &[f64], params: &BoostParams) -> Result<BoostModel> {
    params.check()?;
    check_xy(x, y)?;
    let base_score = params
        .base_score
        .unwrap_or_else(|| y.iter().sum::<f64>() / y.len() as f64);
    Ok(BoostModel {
        base_score,
        trees: Vec::new(),
        params: *params,
        importance_raw: vec![0.0; x.ncols()],
        train_mse: Vec::new(),
    })
}

/// Fits and also returns the running training predictions.
pub fn fit_boost_traced(x: &Matrix, y: &[f64], params: &BoostParams) -> Result<(BoostModel, Vec<f64>)> {
    let mut model = init_boost(x, y, params)?;
    let pred = model.continue_fit(x, y, params.n_rounds)?;
    Ok((model, pred))
}

pub fn fit_boost(x: &Matrix, y: &[f64], params: &BoostParams) -> Result<BoostModel> {
    fit_boost_traced(x, y, params).map(|(m, _)| m)
}
