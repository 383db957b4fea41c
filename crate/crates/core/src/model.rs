//! The five regressors behind one fit/predict contract.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::boost::{self, BoostModel, BoostParams};
use crate::data::Scaler;
use crate::error::{Error, Result};
use crate::forest::{self, ForestModel, ForestParams};
use crate::linreg::{self, LinearModel, LinearParams};
use crate::matrix::Matrix;
use crate::mlp::{self, Activation, MlpModel, MlpParams, Optimizer};
use crate::select::{Config, ModelFamily, ParamValue, Predict, Trainable};
use crate::svr::{self, Kernel, SvrModel, SvrParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linreg,
    Forest,
    Boost,
    Svr,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Linreg,
        ModelKind::Forest,
        ModelKind::Boost,
        ModelKind::Svr,
        ModelKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Linreg => "linreg",
            ModelKind::Forest => "forest",
            ModelKind::Boost => "boost",
            ModelKind::Svr => "svr",
            ModelKind::Mlp => "mlp",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ModelKind::Linreg => "Linear Regression",
            ModelKind::Forest => "Random Forest",
            ModelKind::Boost => "Gradient Boosting",
            ModelKind::Svr => "Support Vector Regression",
            ModelKind::Mlp => "Multilayer Perceptron",
        }
    }

    pub fn parse(s: &str) -> Result<ModelKind> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model `{s}` (expected linreg, forest, boost, svr or mlp)")))
    }

    /// Kernel and gradient models see standardized inputs.
    pub fn needs_scaling(self) -> bool {
        matches!(self, ModelKind::Svr | ModelKind::Mlp)
    }

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<ModelKind> {
        ModelKind::ALL.get(tag as usize).copied()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    Linreg(LinearParams),
    Forest(ForestParams),
    Boost(BoostParams),
    Svr(SvrParams),
    Mlp(MlpParams),
}

fn bad(model: ModelKind, name: &str, v: &ParamValue) -> Error {
    Error::InvalidParam(format!("{model}: bad value `{v}` for `{name}`"))
}

impl ModelSpec {
    pub fn default_for(kind: ModelKind) -> ModelSpec {
        match kind {
            ModelKind::Linreg => ModelSpec::Linreg(LinearParams::default()),
            ModelKind::Forest => ModelSpec::Forest(ForestParams::default()),
            ModelKind::Boost => ModelSpec::Boost(BoostParams::default()),
            ModelKind::Svr => ModelSpec::Svr(SvrParams::default()),
            ModelKind::Mlp => ModelSpec::Mlp(MlpParams::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Linreg(_) => ModelKind::Linreg,
            ModelSpec::Forest(_) => ModelKind::Forest,
            ModelSpec::Boost(_) => ModelKind::Boost,
            ModelSpec::Svr(_) => ModelKind::Svr,
            ModelSpec::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ModelSpec::Linreg(_) | ModelSpec::Svr(_) => {}
            ModelSpec::Forest(p) => p.seed = seed,
            ModelSpec::Boost(p) => p.seed = seed,
            ModelSpec::Mlp(p) => p.seed = seed,
        }
    }

    /// Sets one named hyperparameter.
    pub fn set(&mut self, name: &str, v: &ParamValue) -> Result<()> {
        let kind = self.kind();
        let err = || bad(kind, name, v);
        let f = || v.as_f64().ok_or_else(err);
        let u = || v.as_usize().ok_or_else(err);
        let b = || v.as_bool().ok_or_else(err);
        match self {
            ModelSpec::Linreg(p) => match name {
                "fit_intercept" => p.fit_intercept = b()?,
                _ => return Err(unknown(kind, name)),
            },
            ModelSpec::Forest(p) => match name {
                "n_estimators" => p.n_estimators = u()?,
                "max_depth" => p.growth.max_depth = u()?,
                "min_samples_leaf" => p.growth.min_samples_leaf = u()?,
                "min_gain" => p.growth.min_gain = f()?,
                "bootstrap" => p.bootstrap = b()?,
                "max_features" => {
                    p.growth.max_features = match v {
                        ParamValue::Text(s) if s == "all" => None,
                        _ => Some(u()?),
                    }
                }
                "seed" => p.seed = u()? as u64,
                _ => return Err(unknown(kind, name)),
            },
            ModelSpec::Boost(p) => match name {
                "n_rounds" | "n_estimators" => p.n_rounds = u()?,
                "learning_rate" | "eta" => p.learning_rate = f()?,
                "lambda" | "reg_lambda" => p.lambda = f()?,
                "gamma" => p.gamma = f()?,
                "max_depth" => p.max_depth = u()?,
                "min_child_weight" => p.min_child_weight = f()?,
                "subsample" => p.subsample = f()?,
                "base_score" => {
                    p.base_score = match v {
                        ParamValue::Text(s) if s == "mean" => None,
                        _ => Some(f()?),
                    }
                }
                "seed" => p.seed = u()? as u64,
                _ => return Err(unknown(kind, name)),
            },
            ModelSpec::Svr(p) => match name {
                "c" | "C" => p.c = f()?,
                "epsilon" => p.epsilon = f()?,
                "tol" => p.tol = f()?,
                "max_passes" => p.max_passes = u()?,
                "kernel" => {
                    p.kernel = match v.as_str() {
                        Some("linear") => Kernel::Linear,
                        Some("rbf") => match p.kernel {
                            k @ Kernel::Rbf { .. } => k,
                            Kernel::Linear => Kernel::Rbf { gamma: 0.1 },
                        },
                        _ => return Err(err()),
                    }
                }
                "gamma" => match &mut p.kernel {
                    Kernel::Rbf { gamma } => *gamma = f()?,
                    Kernel::Linear => {
                        return Err(Error::InvalidParam("svr: gamma needs the rbf kernel".into()));
                    }
                },
                _ => return Err(unknown(kind, name)),
            },
            ModelSpec::Mlp(p) => match name {
                "hidden_sizes" | "hidden_layer_sizes" => {
                    p.hidden_sizes = match v {
                        ParamValue::List(items) => items
                            .iter()
                            .map(|i| i.as_usize().ok_or_else(err))
                            .collect::<Result<_>>()?,
                        _ => vec![u()?],
                    }
                }
                "activation" => {
                    p.activation = match v.as_str() {
                        Some("tanh") => Activation::Tanh,
                        Some("logistic") => Activation::Logistic,
                        Some("relu") => Activation::Relu,
                        _ => return Err(err()),
                    }
                }
                "optimizer" | "solver" => {
                    p.optimizer = match v.as_str() {
                        Some("gd") => Optimizer::Gd,
                        Some("lbfgs") => Optimizer::Lbfgs,
                        _ => return Err(err()),
                    }
                }
                "alpha" => p.alpha = f()?,
                "max_iter" => p.max_iter = u()?,
                "tol" => p.tol = f()?,
                "seed" => p.seed = u()? as u64,
                _ => return Err(unknown(kind, name)),
            },
        }
        Ok(())
    }

    /// A copy with every entry of `config` applied; `kernel` goes first so a
    /// `gamma` in the same config lands on the chosen kernel.
    pub fn with_config(&self, config: &Config) -> Result<ModelSpec> {
        let mut spec = self.clone();
        if let Some(k) = config.get("kernel") {
            spec.set("kernel", k)?;
        }
        for (name, v) in config.iter().filter(|(n, _)| n.as_str() != "kernel") {
            spec.set(name, v)?;
        }
        Ok(spec)
    }

    /// Key hyperparameters as `name = value` text.
    pub fn describe(&self) -> String {
        match self {
            ModelSpec::Linreg(p) => format!("fit_intercept = {}", p.fit_intercept),
            ModelSpec::Forest(p) => format!(
                "n_estimators = {}, max_depth = {}, max_features = {}, min_samples_leaf = {}, bootstrap = {}",
                p.n_estimators,
                p.growth.max_depth,
                p.growth.max_features.map_or("all".to_string(), |k| k.to_string()),
                p.growth.min_samples_leaf,
                p.bootstrap
            ),
            ModelSpec::Boost(p) => format!(
                "n_rounds = {}, learning_rate = {}, max_depth = {}, min_child_weight = {}, gamma = {}, lambda = {}, subsample = {}",
                p.n_rounds, p.learning_rate, p.max_depth, p.min_child_weight, p.gamma, p.lambda, p.subsample
            ),
            ModelSpec::Svr(p) => {
                let kernel = match p.kernel {
                    Kernel::Linear => "linear".to_string(),
                    Kernel::Rbf { gamma } => format!("rbf, gamma = {gamma}"),
                };
                format!("C = {}, epsilon = {}, kernel = {kernel}", p.c, p.epsilon)
            }
            ModelSpec::Mlp(p) => format!(
                "hidden_sizes = {:?}, activation = {}, alpha = {}, max_iter = {}, optimizer = {}",
                p.hidden_sizes,
                match p.activation {
                    Activation::Tanh => "tanh",
                    Activation::Logistic => "logistic",
                    Activation::Relu => "relu",
                },
                p.alpha,
                p.max_iter,
                match p.optimizer {
                    Optimizer::Gd => "gd",
                    Optimizer::Lbfgs => "lbfgs",
                }
            ),
        }
    }

    pub fn fit_model(&self, x: &Matrix, y: &[f64]) -> Result<FittedModel> {
        let scaler = if self.kind().needs_scaling() {
            Some(Scaler::fit(x)?)
        } else {
            None
        };
        let scaled;
        let xin = match &scaler {
            Some(s) => {
                scaled = s.transform(x)?;
                &scaled
            }
            None => x,
        };
        let model = match self {
            ModelSpec::Linreg(p) => Model::Linreg(linreg::fit_linear(xin, y, p)?),
            ModelSpec::Forest(p) => Model::Forest(forest::fit_forest(xin, y, p)?),
            ModelSpec::Boost(p) => Model::Boost(boost::fit_boost(xin, y, p)?),
            ModelSpec::Svr(p) => Model::Svr(svr::fit_svr(xin, y, p)?),
            ModelSpec::Mlp(p) => Model::Mlp(mlp::fit_mlp(xin, y, p)?),
        };
        Ok(FittedModel { model, scaler })
    }
}

fn unknown(kind: ModelKind, name: &str) -> Error {
    Error::InvalidParam(format!("{kind}: unknown parameter `{name}`"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Linreg(LinearModel),
    Forest(ForestModel),
    Boost(BoostModel),
    Svr(SvrModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Linreg(_) => ModelKind::Linreg,
            Model::Forest(_) => ModelKind::Forest,
            Model::Boost(_) => ModelKind::Boost,
            Model::Svr(_) => ModelKind::Svr,
            Model::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Linreg(m) => m.n_features(),
            Model::Forest(m) => m.n_features,
            Model::Boost(m) => m.n_features(),
            Model::Svr(m) => m.n_features,
            Model::Mlp(m) => m.n_features(),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self {
            Model::Linreg(m) => m.predict(x),
            Model::Forest(m) => m.predict(x),
            Model::Boost(m) => m.predict(x),
            Model::Svr(m) => m.predict(x),
            Model::Mlp(m) => m.predict(x),
        }
    }
}

/// A fitted model plus the input scaler it was trained behind, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub model: Model,
    pub scaler: Option<Scaler>,
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn n_features(&self) -> usize {
        self.model.n_features()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        match &self.scaler {
            Some(s) => self.model.predict(&s.transform(x)?),
            None => self.model.predict(x),
        }
    }

    /// Solver notes worth surfacing in a report (non-convergence).
    pub fn diagnostics(&self) -> Option<String> {
        match &self.model {
            Model::Svr(m) if !m.converged => Some(format!("svr stopped after {} iterations without converging", m.iterations)),
            Model::Mlp(m) if !m.converged => Some(format!(
                "mlp reached max_iter = {} without meeting tol",
                m.params.max_iter
            )),
            _ => None,
        }
    }
}

impl Trainable for ModelSpec {
    fn fit(&self, x: &Matrix, y: &[f64]) -> Result<Box<dyn Predict>> {
        Ok(Box::new(self.fit_model(x, y)?))
    }
}

impl Predict for FittedModel {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        FittedModel::predict(self, x)
    }
}

impl ModelFamily for ModelSpec {
    fn build(&self, config: &Config) -> Result<Box<dyn Trainable>> {
        Ok(Box::new(self.with_config(config)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for k in ModelKind::ALL {
            assert_eq!(ModelKind::parse(k.name()).unwrap(), k);
            assert_eq!(ModelKind::from_tag(k.tag()), Some(k));
        }
        assert!(ModelKind::parse("xgb").is_err());
    }

    #[test]
    fn config_application() {
        let mut c = Config::new();
        c.insert("gamma".into(), ParamValue::Float(0.5));
        c.insert("kernel".into(), ParamValue::Text("rbf".into()));
        c.insert("C".into(), ParamValue::Int(5));
        let s = ModelSpec::default_for(ModelKind::Svr).with_config(&c).unwrap();
        let ModelSpec::Svr(p) = s else { panic!() };
        assert_eq!(p.c, 5.0);
        assert_eq!(p.kernel, Kernel::Rbf { gamma: 0.5 });

        let mut c = Config::new();
        c.insert("depth".into(), ParamValue::Int(5));
        assert!(ModelSpec::default_for(ModelKind::Boost).with_config(&c).is_err());

        let mut c = Config::new();
        c.insert("hidden_sizes".into(), ParamValue::List(vec![ParamValue::Int(8), ParamValue::Int(4)]));
        let ModelSpec::Mlp(p) = ModelSpec::default_for(ModelKind::Mlp).with_config(&c).unwrap() else { panic!() };
        assert_eq!(p.hidden_sizes, vec![8, 4]);
    }
}
