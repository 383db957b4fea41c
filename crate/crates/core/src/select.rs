//! K-fold cross-validation and hyperparameter search.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics;
use crate::rng;

/// Anything that can be fit on a feature matrix and target.
pub trait Trainable {
    fn fit(&self, x: &Matrix, y: &[f64]) -> Result<Box<dyn Predict>>;
}

pub trait Predict {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>>;
}

/// One hyperparameter value as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    List(Vec<ParamValue>),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(v) => Some(v as f64),
            ParamValue::Float(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_usize(&self) -> Option<usize> {
        match *self {
            ParamValue::Int(v) if v >= 0 => Some(v as usize),
            ParamValue::Float(v) if v >= 0.0 && v.fract() == 0.0 => Some(v as usize),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            ParamValue::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn from_toml(v: &toml::Value) -> Result<ParamValue> {
        Ok(match v {
            toml::Value::Boolean(b) => ParamValue::Bool(*b),
            toml::Value::Integer(i) => ParamValue::Int(*i),
            toml::Value::Float(f) => ParamValue::Float(*f),
            toml::Value::String(s) => ParamValue::Text(s.clone()),
            toml::Value::Array(a) => ParamValue::List(a.iter().map(ParamValue::from_toml).collect::<Result<_>>()?),
            other => return Err(Error::Config(format!("unsupported parameter value {other}"))),
        })
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Text(s) => write!(f, "{s}"),
            ParamValue::List(items) => {
                f.write_str("[")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{it}")?;
                }
                f.write_str("]")
            }
        }
    }
}

pub type Config = BTreeMap<String, ParamValue>;

pub fn config_text(config: &Config) -> String {
    config.iter().map(|(k, v)| format!("{k} = {v}")).collect::<Vec<_>>().join(", ")
}

/// Builds a trainable model from one configuration.
pub trait ModelFamily {
    fn build(&self, config: &Config) -> Result<Box<dyn Trainable>>;
}

impl<F> ModelFamily for F
where
    F: Fn(&Config) -> Result<Box<dyn Trainable>>,
{
    fn build(&self, config: &Config) -> Result<Box<dyn Trainable>> {
        self(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub n: usize,
    pub seed: u64,
    pub fold_assignment: Vec<usize>,
}

impl FoldPlan {
    /// Held-out rows of every fold, ascending.
    pub fn folds(&self) -> Vec<Vec<usize>> {
        let mut f = vec![Vec::new(); self.k];
        for (i, &a) in self.fold_assignment.iter().enumerate() {
            f[a].push(i);
        }
        f
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.fold_assignment[i] != fold).collect()
    }
}

/// Seeded shuffle, then contiguous chunks; the first `n mod k` folds hold one
/// extra row.
pub fn kfold_plan(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidParam(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidParam(format!("{k} folds exceed {n} rows")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "kfold", 0));
    let mut fold_assignment = vec![0; n];
    let (base, extra) = (n / k, n % k);
    let mut at = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &i in &order[at..at + size] {
            fold_assignment[i] = f;
        }
        at += size;
    }
    Ok(FoldPlan {
        k,
        n,
        seed,
        fold_assignment,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// R² per fold; `None` where the held-out target was constant.
    pub fold_scores: Vec<Option<f64>>,
    pub flagged_folds: Vec<usize>,
    /// 100 × mean R² over unflagged folds.
    pub cv_score: f64,
}

pub fn cross_validate(model: &dyn Trainable, ds: &Dataset, plan: &FoldPlan) -> Result<CvResult> {
    if plan.n != ds.n_rows() {
        return Err(Error::LengthMismatch {
            left: plan.n,
            right: ds.n_rows(),
        });
    }
    let mut fold_scores = Vec::with_capacity(plan.k);
    let mut flagged_folds = Vec::new();
    for (f, test) in plan.folds().iter().enumerate() {
        let train = plan.train_rows(f);
        let tr = ds.subset(&train);
        let te = ds.subset(test);
        let fitted = model.fit(&tr.x, &tr.y)?;
        let pred = fitted.predict(&te.x)?;
        match metrics::r_squared(&te.y, &pred) {
            Ok(r2) if r2.is_finite() => fold_scores.push(Some(r2)),
            Ok(_) => return Err(Error::NonFinite("fold score")),
            Err(Error::UndefinedMetric(_)) | Err(Error::EmptyInput(_)) => {
                log::warn!("fold {f}: R² undefined, fold excluded");
                flagged_folds.push(f);
                fold_scores.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let scored: Vec<f64> = fold_scores.iter().flatten().copied().collect();
    if scored.is_empty() {
        return Err(Error::UndefinedMetric("every fold has a constant target"));
    }
    let cv_score = 100.0 * scored.iter().sum::<f64>() / scored.len() as f64;
    Ok(CvResult {
        fold_scores,
        flagged_folds,
        cv_score,
    })
}

/// Candidate values per parameter name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid(pub BTreeMap<String, Vec<ParamValue>>);

impl ParamGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, values: Vec<ParamValue>) -> Self {
        self.0.insert(name.to_string(), values);
        self
    }

    pub fn size(&self) -> usize {
        if self.0.is_empty() {
            return 0;
        }
        self.0.values().map(Vec::len).product()
    }

    /// Cartesian product; the alphabetically first name varies slowest.
    pub fn configs(&self) -> Vec<Config> {
        let mut out = vec![Config::new()];
        if self.0.is_empty() {
            return Vec::new();
        }
        for (name, values) in &self.0 {
            let mut next = Vec::with_capacity(out.len() * values.len());
            for c in &out {
                for v in values {
                    let mut c = c.clone();
                    c.insert(name.clone(), v.clone());
                    next.push(c);
                }
            }
            out = next;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub config: Config,
    pub fold_scores: Vec<Option<f64>>,
    /// Negative infinity for failed configurations.
    pub mean_score: f64,
    pub rank: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub evaluations: Vec<Evaluation>,
    pub best_index: usize,
    pub best_config: Config,
    pub best_mean_score: f64,
}

impl SearchResult {
    /// Tab-separated table: config, fold scores, mean, rank, error.
    pub fn to_text(&self) -> String {
        let k = self.evaluations.iter().map(|e| e.fold_scores.len()).max().unwrap_or(0);
        let mut s = String::from("config");
        for f in 0..k {
            s.push_str(&format!("\tfold{f}"));
        }
        s.push_str("\tmean\trank\terror\n");
        for e in &self.evaluations {
            s.push_str(&config_text(&e.config));
            for f in 0..k {
                match e.fold_scores.get(f).copied().flatten() {
                    Some(v) => s.push_str(&format!("\t{v:.6}")),
                    None => s.push_str("\t-"),
                }
            }
            let mean = if e.mean_score.is_finite() {
                format!("{:.4}", e.mean_score)
            } else {
                "failed".into()
            };
            s.push_str(&format!("\t{mean}\t{}\t{}\n", e.rank, e.error.as_deref().unwrap_or("")));
        }
        s
    }
}

/// Evaluates configurations in the given order. Ties keep the earliest.
pub fn evaluate_configs(family: &dyn ModelFamily, configs: Vec<Config>, ds: &Dataset, plan: &FoldPlan) -> Result<SearchResult> {
    if configs.is_empty() {
        return Err(Error::InvalidParam("empty parameter grid".into()));
    }
    let mut evaluations: Vec<Evaluation> = configs
        .into_iter()
        .map(|config| {
            let outcome = family.build(&config).and_then(|m| cross_validate(m.as_ref(), ds, plan));
            match outcome {
                Ok(cv) => Evaluation {
                    config,
                    fold_scores: cv.fold_scores,
                    mean_score: cv.cv_score,
                    rank: 0,
                    error: None,
                },
                Err(e) => {
                    log::warn!("config {} failed: {e}", config_text(&config));
                    Evaluation {
                        config,
                        fold_scores: Vec::new(),
                        mean_score: f64::NEG_INFINITY,
                        rank: 0,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..evaluations.len()).collect();
    order.sort_by(|&a, &b| {
        evaluations[b]
            .mean_score
            .total_cmp(&evaluations[a].mean_score)
            .then(a.cmp(&b))
    });
    for (r, &i) in order.iter().enumerate() {
        evaluations[i].rank = r + 1;
    }
    let best_index = order[0];
    Ok(SearchResult {
        best_config: evaluations[best_index].config.clone(),
        best_mean_score: evaluations[best_index].mean_score,
        best_index,
        evaluations,
    })
}

pub fn grid_search(family: &dyn ModelFamily, grid: &ParamGrid, ds: &Dataset, plan: &FoldPlan) -> Result<SearchResult> {
    evaluate_configs(family, grid.configs(), ds, plan)
}

/// `n_iter` configurations drawn with replacement, one value per parameter
/// in name order.
pub fn sample_configs(grid: &ParamGrid, n_iter: usize, seed: u64) -> Result<Vec<Config>> {
    if n_iter == 0 {
        return Err(Error::InvalidParam("n_iter must be at least 1".into()));
    }
    if grid.size() == 0 {
        return Err(Error::InvalidParam("empty parameter grid".into()));
    }
    let mut r = rng::stream(seed, "random_search", 0);
    Ok((0..n_iter)
        .map(|_| {
            grid.0
                .iter()
                .map(|(k, vals)| (k.clone(), vals[r.gen_range(0..vals.len())].clone()))
                .collect()
        })
        .collect())
}

pub fn random_search(
    family: &dyn ModelFamily,
    grid: &ParamGrid,
    n_iter: usize,
    seed: u64,
    ds: &Dataset,
    plan: &FoldPlan,
) -> Result<SearchResult> {
    evaluate_configs(family, sample_configs(grid, n_iter, seed)?, ds, plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_sizes() {
        let p = kfold_plan(6, 3, 1).unwrap();
        assert!(p.folds().iter().all(|f| f.len() == 2));
        let p = kfold_plan(7, 3, 1).unwrap();
        let sizes: Vec<usize> = p.folds().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 2, 2]);
        assert_eq!(kfold_plan(7, 3, 1).unwrap(), p);
        assert!(kfold_plan(2, 3, 1).is_err());
        assert!(kfold_plan(5, 1, 1).is_err());
    }

    #[test]
    fn grid_product_order() {
        let g = ParamGrid::new()
            .with("b", vec![ParamValue::Int(3)])
            .with("a", vec![ParamValue::Int(1), ParamValue::Int(2)]);
        let c = g.configs();
        assert_eq!(g.size(), 2);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0]["a"], ParamValue::Int(1));
        assert_eq!(c[1]["a"], ParamValue::Int(2));
        let g = g.with("c", vec![ParamValue::Int(7), ParamValue::Int(8)]);
        let c = g.configs();
        assert_eq!((c[1]["a"].clone(), c[1]["c"].clone()), (ParamValue::Int(1), ParamValue::Int(8)));
    }

    #[test]
    fn sampling_is_deterministic_with_replacement() {
        let g = ParamGrid::new().with("a", vec![ParamValue::Int(1), ParamValue::Int(2)]);
        let s = sample_configs(&g, 9, 4).unwrap();
        assert_eq!(s.len(), 9);
        assert_eq!(s, sample_configs(&g, 9, 4).unwrap());
        assert!(sample_configs(&g, 0, 4).is_err());
    }
}
