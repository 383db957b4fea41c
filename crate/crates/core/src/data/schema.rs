//! Declarative column schema.
//!
//! A schema file is TOML: an optional `version = 1` key followed by one
//! `[[column]]` table per CSV column.
//!
//! ```toml
//! version = 1
//!
//! [[column]]
//! name = "Exter Qual"
//! kind = "ordinal"
//! order = ["None", "Po", "Fa", "TA", "Gd", "Ex"]
//! missing = "sentinel_category"
//! ```
//!
//! `kind` is one of `numeric`, `categorical`, `ordinal`, `identifier`,
//! `target`. `missing` is one of `drop_row`, `impute_median`, `impute_mode`,
//! `sentinel_category`; it defaults to `impute_median` for numeric columns,
//! `sentinel_category` for categorical and ordinal ones and `drop_row`
//! otherwise. Numeric and target columns accept optional `min` / `max`
//! bounds, checked by validation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Label substituted for absent categorical cells.
pub const SENTINEL: &str = "None";

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    /// Ordered labels, lowest rank first.
    Ordinal(Vec<String>),
    Identifier,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    DropRow,
    ImputeMedian,
    ImputeMode,
    SentinelCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub missing: MissingPolicy,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        let missing = match kind {
            ColumnKind::Numeric => MissingPolicy::ImputeMedian,
            ColumnKind::Categorical | ColumnKind::Ordinal(_) => MissingPolicy::SentinelCategory,
            ColumnKind::Identifier | ColumnKind::Target => MissingPolicy::DropRow,
        };
        Self {
            name: name.into(),
            kind,
            missing,
            min: None,
            max: None,
        }
    }

    pub fn numeric(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Numeric)
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Categorical)
    }

    pub fn ordinal<S: Into<String>>(name: impl Into<String>, order: impl IntoIterator<Item = S>) -> Self {
        Self::new(name, ColumnKind::Ordinal(order.into_iter().map(Into::into).collect()))
    }

    pub fn identifier(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Identifier)
    }

    pub fn target(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Target)
    }

    pub fn with_missing(mut self, policy: MissingPolicy) -> Self {
        self.missing = policy;
        self
    }

    pub fn with_range(mut self, min: Option<f64>, max: Option<f64>) -> Self {
        self.min = min;
        self.max = max;
        self
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, ColumnKind::Numeric | ColumnKind::Target)
    }

    /// Identifier and target cells must always be present.
    pub fn is_mandatory(&self) -> bool {
        matches!(self.kind, ColumnKind::Identifier | ColumnKind::Target)
    }

    pub fn in_range(&self, v: f64) -> bool {
        self.min.is_none_or(|m| v >= m) && self.max.is_none_or(|m| v <= m)
    }

    fn check(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::Schema(format!("column `{}`: {why}", self.name)));
        match (&self.kind, self.missing) {
            (ColumnKind::Ordinal(order), _) if order.is_empty() => bad("ordinal column needs a non-empty order"),
            (ColumnKind::Ordinal(order), _) => {
                let mut seen = std::collections::BTreeSet::new();
                if order.iter().all(|o| seen.insert(o)) {
                    Ok(())
                } else {
                    bad("ordinal order repeats a label")
                }
            }
            _ => Ok(()),
        }?;
        match (&self.kind, self.missing) {
            (ColumnKind::Numeric, MissingPolicy::ImputeMode | MissingPolicy::SentinelCategory) => {
                bad("numeric columns support drop_row or impute_median")
            }
            (ColumnKind::Categorical | ColumnKind::Ordinal(_), MissingPolicy::ImputeMedian) => {
                bad("impute_median needs a numeric column")
            }
            (ColumnKind::Target, p) if p != MissingPolicy::DropRow => bad("target rows with missing values must be dropped"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let targets = columns.iter().filter(|c| c.kind == ColumnKind::Target).count();
        if targets != 1 {
            return Err(Error::Schema(format!(
                "exactly one target column required, found {targets}"
            )));
        }
        let mut names = std::collections::BTreeSet::new();
        for c in &columns {
            if !names.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
            c.check()?;
        }
        Ok(Self { columns })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn get(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn target(&self) -> &ColumnSpec {
        self.columns
            .iter()
            .find(|c| c.kind == ColumnKind::Target)
            .expect("schema invariant: one target")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SchemaFile = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if file.version.unwrap_or(SCHEMA_VERSION) != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported schema version {}",
                file.version.unwrap_or_default()
            )));
        }
        let columns = file
            .column
            .into_iter()
            .map(ColumnEntry::into_spec)
            .collect::<Result<Vec<_>>>()?;
        Self::new(columns)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let file = SchemaFile {
            version: Some(SCHEMA_VERSION),
            column: self.columns.iter().map(ColumnEntry::from_spec).collect(),
        };
        toml::to_string(&file).expect("schema serializes")
    }

    /// Hex SHA-256 over the canonical TOML rendering.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_toml_string().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaFile {
    version: Option<u32>,
    #[serde(default)]
    column: Vec<ColumnEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ColumnEntry {
    name: String,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    order: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    missing: Option<MissingPolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max: Option<f64>,
}

impl ColumnEntry {
    fn into_spec(self) -> Result<ColumnSpec> {
        let kind = match (self.kind.as_str(), self.order) {
            ("ordinal", Some(order)) => ColumnKind::Ordinal(order),
            ("ordinal", None) => {
                return Err(Error::Schema(format!("ordinal column `{}` needs `order`", self.name)))
            }
            (_, Some(_)) => {
                return Err(Error::Schema(format!("`order` given for non-ordinal column `{}`", self.name)))
            }
            ("numeric", None) => ColumnKind::Numeric,
            ("categorical", None) => ColumnKind::Categorical,
            ("identifier", None) => ColumnKind::Identifier,
            ("target", None) => ColumnKind::Target,
            (other, None) => {
                return Err(Error::Schema(format!("unknown kind `{other}` for column `{}`", self.name)))
            }
        };
        let mut spec = ColumnSpec::new(self.name, kind).with_range(self.min, self.max);
        if let Some(m) = self.missing {
            spec.missing = m;
        }
        Ok(spec)
    }

    fn from_spec(spec: &ColumnSpec) -> Self {
        let (kind, order) = match &spec.kind {
            ColumnKind::Numeric => ("numeric", None),
            ColumnKind::Categorical => ("categorical", None),
            ColumnKind::Ordinal(o) => ("ordinal", Some(o.clone())),
            ColumnKind::Identifier => ("identifier", None),
            ColumnKind::Target => ("target", None),
        };
        Self {
            name: spec.name.clone(),
            kind: kind.to_string(),
            order,
            missing: Some(spec.missing),
            min: spec.min,
            max: spec.max,
        }
    }
}
