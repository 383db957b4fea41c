//! Conversion of a cleaned table into a numeric design matrix.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, Schema};
use super::table::{Cell, RawTable};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetTransform {
    Identity,
    #[default]
    Log1p,
}

impl TargetTransform {
    pub fn apply(self, y: f64) -> Result<f64> {
        match self {
            TargetTransform::Identity => Ok(y),
            TargetTransform::Log1p if y > 0.0 => Ok(y.ln_1p()),
            TargetTransform::Log1p => Err(Error::NonPositiveTarget(y)),
        }
    }

    pub fn invert(self, v: f64) -> f64 {
        match self {
            TargetTransform::Identity => v,
            TargetTransform::Log1p => v.exp_m1(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "log1p" => Ok(Self::Log1p),
            other => Err(Error::Config(format!("unknown target transform `{other}`"))),
        }
    }
}

impl fmt::Display for TargetTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetTransform::Identity => "identity",
            TargetTransform::Log1p => "log1p",
        })
    }
}

/// Numeric features plus target, ready for model fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    pub target_transform: TargetTransform,
    pub provenance: String,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.nrows(),
                right: y.len(),
            });
        }
        if x.ncols() != feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: feature_names.len(),
                found: x.ncols(),
            });
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("feature matrix"));
        }
        crate::matrix::check_finite(&y, "target")?;
        Ok(Self {
            x,
            y,
            feature_names,
            target_transform: TargetTransform::Identity,
            provenance: String::new(),
        })
    }

    /// Unnamed features `x0, x1, ...`.
    pub fn from_xy(x: Matrix, y: Vec<f64>) -> Result<Self> {
        let names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(x, y, names)
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            target_transform: self.target_transform,
            provenance: self.provenance.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EncodedColumn {
    Numeric { name: String },
    Ordinal { name: String, order: Vec<String> },
    OneHot { name: String, categories: Vec<String> },
}

impl EncodedColumn {
    fn name(&self) -> &str {
        match self {
            EncodedColumn::Numeric { name }
            | EncodedColumn::Ordinal { name, .. }
            | EncodedColumn::OneHot { name, .. } => name,
        }
    }

    fn width(&self) -> usize {
        match self {
            EncodedColumn::OneHot { categories, .. } => categories.len(),
            _ => 1,
        }
    }
}

/// The fitted encoding: which columns feed which features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub columns: Vec<EncodedColumn>,
    pub target: String,
    pub target_transform: TargetTransform,
}

/// Encoded prediction input; rows that could not be encoded are listed in
/// `failed_rows` and their feature values are NaN.
#[derive(Debug, Clone)]
pub struct EncodedRows {
    pub x: Matrix,
    pub failed_rows: Vec<usize>,
    pub warnings: Vec<String>,
}

impl Encoder {
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for c in &self.columns {
            match c {
                EncodedColumn::OneHot { name, categories } => {
                    names.extend(categories.iter().map(|cat| format!("{name}={cat}")))
                }
                other => names.push(other.name().to_string()),
            }
        }
        names
    }

    pub fn n_features(&self) -> usize {
        self.columns.iter().map(EncodedColumn::width).sum()
    }

    /// Encodes rows of an already filled table. Unseen categorical labels
    /// become an all-zero one-hot group with a warning; any other problem
    /// marks the row as failed.
    pub fn transform(&self, table: &RawTable) -> Result<EncodedRows> {
        let idx = self
            .columns
            .iter()
            .map(|c| {
                table
                    .column_index(c.name())
                    .ok_or_else(|| Error::HeaderMismatch(format!("input lacks column `{}`", c.name())))
            })
            .collect::<Result<Vec<_>>>()?;
        let d = self.n_features();
        let mut x = Matrix::zeros(table.n_rows(), d);
        let mut failed_rows = Vec::new();
        let mut warnings = Vec::new();
        for (i, row) in table.rows.iter().enumerate() {
            let out = x.row_mut(i);
            let mut at = 0;
            let mut ok = true;
            for (col, &j) in self.columns.iter().zip(&idx) {
                match encode_cell(col, &row[j], &mut out[at..at + col.width()]) {
                    Ok(None) => {}
                    Ok(Some(w)) => warnings.push(format!("row {i}: {w}")),
                    Err(e) => {
                        warnings.push(format!("row {i}: {e}"));
                        ok = false;
                    }
                }
                at += col.width();
            }
            if !ok {
                out.iter_mut().for_each(|v| *v = f64::NAN);
                failed_rows.push(i);
            }
        }
        Ok(EncodedRows {
            x,
            failed_rows,
            warnings,
        })
    }

    /// Transformed target values, if the table carries the target column.
    pub fn targets(&self, table: &RawTable) -> Option<Vec<Option<f64>>> {
        let j = table.column_index(&self.target)?;
        Some(
            table
                .rows
                .iter()
                .map(|r| r[j].as_number().and_then(|v| self.target_transform.apply(v).ok()))
                .collect(),
        )
    }
}

/// Writes one column's encoding into `out`. Returns a warning for unseen
/// one-hot labels.
fn encode_cell(col: &EncodedColumn, cell: &Cell, out: &mut [f64]) -> Result<Option<String>> {
    match (col, cell) {
        (EncodedColumn::Numeric { .. }, Cell::Number(v)) => {
            out[0] = *v;
            Ok(None)
        }
        (EncodedColumn::Ordinal { name, order }, Cell::Text(s)) => {
            let rank = order.iter().position(|o| o == s).ok_or_else(|| Error::UnseenCategory {
                column: name.clone(),
                value: s.clone(),
            })?;
            out[0] = rank as f64;
            Ok(None)
        }
        (EncodedColumn::OneHot { name, categories }, Cell::Text(s)) => {
            match categories.binary_search(s) {
                Ok(k) => {
                    out[k] = 1.0;
                    Ok(None)
                }
                Err(_) => Ok(Some(format!("unseen category `{s}` in `{name}` encoded as all zeros"))),
            }
        }
        (c, Cell::Missing) => Err(Error::column(c.name(), "missing value after cleaning")),
        (c, other) => Err(Error::column(c.name(), format!("cannot encode cell {other:?}"))),
    }
}

/// One-hot expands categoricals, ranks ordinals, drops identifiers and
/// extracts the (transformed) target.
pub fn encode(table: &RawTable, schema: &Schema, transform: TargetTransform) -> Result<(Dataset, Encoder)> {
    let mut columns = Vec::new();
    for spec in schema.columns() {
        let col = match &spec.kind {
            ColumnKind::Identifier | ColumnKind::Target => continue,
            ColumnKind::Numeric => EncodedColumn::Numeric { name: spec.name.clone() },
            ColumnKind::Ordinal(order) => EncodedColumn::Ordinal {
                name: spec.name.clone(),
                order: order.clone(),
            },
            ColumnKind::Categorical => {
                let j = table
                    .column_index(&spec.name)
                    .ok_or_else(|| Error::HeaderMismatch(format!("table lacks column `{}`", spec.name)))?;
                let cats: BTreeSet<String> = table
                    .rows
                    .iter()
                    .filter_map(|r| r[j].as_text().map(str::to_string))
                    .collect();
                EncodedColumn::OneHot {
                    name: spec.name.clone(),
                    categories: cats.into_iter().collect(),
                }
            }
        };
        columns.push(col);
    }
    let encoder = Encoder {
        columns,
        target: schema.target().name.clone(),
        target_transform: transform,
    };

    let jt = table
        .column_index(&encoder.target)
        .ok_or_else(|| Error::HeaderMismatch(format!("table lacks target `{}`", encoder.target)))?;
    let mut y = Vec::with_capacity(table.n_rows());
    for row in &table.rows {
        let v = row[jt]
            .as_number()
            .ok_or_else(|| Error::column(&encoder.target, "missing or invalid target after cleaning"))?;
        y.push(transform.apply(v)?);
    }

    let enc = encoder.transform(table)?;
    if let Some(&i) = enc.failed_rows.first() {
        // Training input has to encode completely.
        let detail = enc.warnings.iter().find(|w| w.starts_with(&format!("row {i}:")));
        return Err(Error::Schema(detail.cloned().unwrap_or_else(|| format!("row {i} failed to encode"))));
    }
    let mut ds = Dataset::new(enc.x, y, encoder.feature_names())?;
    ds.target_transform = transform;
    Ok((ds, encoder))
}
