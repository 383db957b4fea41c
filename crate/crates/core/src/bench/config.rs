//! Experiment configuration file.
//!
//! The file is TOML; the grammar is documented in `docs/config.md`. Relative
//! paths resolve against the directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::data::TargetTransform;
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelSpec};
use crate::rng;
use crate::select::{Config, ParamGrid, ParamValue};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub enabled: bool,
    /// Overrides applied on top of the built-in defaults.
    pub params: Config,
    pub grid: ParamGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: PathBuf,
    pub schema: PathBuf,
    pub target_transform: TargetTransform,
    pub test_fraction: f64,
    pub seed: u64,
    pub folds: usize,
    pub output: PathBuf,
    pub drift_threshold: f64,
    /// Written into artifacts verbatim so repeated runs stay byte-identical.
    pub timestamp: u64,
    pub outlier_columns: Vec<String>,
    pub outlier_k: f64,
    pub histogram_bins: usize,
    pub top_features: usize,
    /// One entry per model kind, in canonical order.
    pub models: Vec<ModelConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    version: Option<u32>,
    experiment: ExperimentSection,
    #[serde(default)]
    models: BTreeMap<String, ModelSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    data: PathBuf,
    schema: PathBuf,
    target_transform: Option<String>,
    test_fraction: Option<f64>,
    seed: Option<u64>,
    folds: Option<usize>,
    output: Option<PathBuf>,
    drift_threshold: Option<f64>,
    timestamp: Option<u64>,
    outlier_columns: Option<Vec<String>>,
    outlier_k: Option<f64>,
    histogram_bins: Option<usize>,
    top_features: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    enabled: Option<bool>,
    #[serde(default)]
    params: toml::Table,
    #[serde(default)]
    grid: toml::Table,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(v) = file.version {
            if v != CONFIG_VERSION {
                return Err(Error::Config(format!("unsupported config version {v}")));
            }
        }
        let e = file.experiment;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let mut models: Vec<ModelConfig> = ModelKind::ALL
            .iter()
            .map(|&kind| ModelConfig {
                kind,
                enabled: true,
                params: Config::new(),
                grid: ParamGrid::new(),
            })
            .collect();
        for (name, section) in file.models {
            let kind = ModelKind::parse(&name)?;
            let m = &mut models[kind.tag() as usize];
            m.enabled = section.enabled.unwrap_or(true);
            for (k, v) in &section.params {
                m.params.insert(k.clone(), ParamValue::from_toml(v)?);
            }
            for (k, v) in &section.grid {
                let values = match ParamValue::from_toml(v)? {
                    ParamValue::List(items) if !items.is_empty() => items,
                    _ => {
                        return Err(Error::Config(format!(
                            "models.{name}.grid.{k} must be a non-empty array"
                        )))
                    }
                };
                m.grid.0.insert(k.clone(), values);
            }
        }
        let cfg = ExperimentConfig {
            data: resolve(e.data),
            schema: resolve(e.schema),
            target_transform: match e.target_transform {
                Some(s) => TargetTransform::parse(&s)?,
                None => TargetTransform::Log1p,
            },
            test_fraction: e.test_fraction.unwrap_or(0.2),
            seed: e.seed.unwrap_or(0),
            folds: e.folds.unwrap_or(5),
            output: resolve(e.output.unwrap_or_else(|| PathBuf::from("out"))),
            drift_threshold: e.drift_threshold.unwrap_or(2.0),
            timestamp: e.timestamp.unwrap_or(0),
            outlier_columns: e.outlier_columns.unwrap_or_default(),
            outlier_k: e.outlier_k.unwrap_or(1.5),
            histogram_bins: e.histogram_bins.unwrap_or(30),
            top_features: e.top_features.unwrap_or(20),
            models,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config("test_fraction must lie in (0, 1)".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        if self.histogram_bins == 0 {
            return Err(Error::Config("histogram_bins must be positive".into()));
        }
        for m in &self.models {
            self.spec(m.kind)?;
            for c in m.grid.configs() {
                self.spec(m.kind)?.with_config(&c)?;
            }
        }
        Ok(())
    }

    /// Keeps only the listed models enabled.
    pub fn restrict_models(&mut self, kinds: &[ModelKind]) {
        for m in &mut self.models {
            m.enabled = kinds.contains(&m.kind);
        }
    }

    pub fn enabled(&self) -> impl Iterator<Item = &ModelConfig> {
        self.models.iter().filter(|m| m.enabled)
    }

    pub fn model(&self, kind: ModelKind) -> &ModelConfig {
        &self.models[kind.tag() as usize]
    }

    /// Seed handed to a model; derived from the master seed.
    pub fn model_seed(&self, kind: ModelKind) -> u64 {
        rng::derive_seed(self.seed, "model", kind.tag() as u64)
    }

    /// Built-in defaults, overridden by the config's `params`, seeded.
    pub fn spec(&self, kind: ModelKind) -> Result<ModelSpec> {
        let mut spec = ModelSpec::default_for(kind);
        spec.set_seed(self.model_seed(kind));
        spec.with_config(&self.model(kind).params)
    }
}
