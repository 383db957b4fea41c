//! Raw CSV ingestion.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, Schema};
use crate::error::{Error, Result};

/// One CSV cell, typed against its column's declared kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Missing,
    Number(f64),
    Text(String),
    /// Present but unparseable for the column kind; keeps the raw text.
    Invalid(String),
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Canonical text of the cell, used for identifiers and duplicate checks.
    pub fn key(&self) -> String {
        match self {
            Cell::Missing => String::new(),
            Cell::Number(v) => format_number(*v),
            Cell::Text(s) | Cell::Invalid(s) => s.clone(),
        }
    }
}

fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Parses one raw CSV field for a column of the given kind.
pub fn parse_cell(raw: &str, kind: &ColumnKind) -> Cell {
    let raw = raw.trim();
    if raw.is_empty() || raw == "NA" {
        return Cell::Missing;
    }
    match kind {
        ColumnKind::Numeric | ColumnKind::Target => match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Cell::Number(v),
            _ => Cell::Invalid(raw.to_string()),
        },
        ColumnKind::Categorical | ColumnKind::Ordinal(_) | ColumnKind::Identifier => {
            Cell::Text(raw.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTable {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl RawTable {
    pub fn new(column_names: Vec<String>, rows: Vec<Vec<Cell>>) -> Result<Self> {
        let n_cols = column_names.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_cols {
                return Err(Error::RowLength {
                    row: i,
                    expected: n_cols,
                    found: r.len(),
                });
            }
        }
        Ok(Self { column_names, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<impl Iterator<Item = &Cell>> {
        let j = self.column_index(name)?;
        Some(self.rows.iter().map(move |r| &r[j]))
    }

    /// Keeps the rows whose index satisfies `keep`.
    pub fn retain_rows(&mut self, mut keep: impl FnMut(usize, &[Cell]) -> bool) {
        let mut i = 0;
        self.rows.retain(|r| {
            let k = keep(i, r);
            i += 1;
            k
        });
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Accept files without the target column (batch prediction input).
    pub allow_missing_target: bool,
}

/// Loads a CSV file whose header must name exactly the schema's columns.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawTable> {
    load_csv_with(path, schema, LoadOptions::default())
}

pub fn load_csv_with(path: &Path, schema: &Schema, opts: LoadOptions) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, opts)
}

pub fn read_csv<R: std::io::Read>(reader: R, schema: &Schema, opts: LoadOptions) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::HeaderMismatch("missing header row".into()));
    }

    let mut kinds = Vec::with_capacity(header.len());
    for h in &header {
        let spec = schema
            .get(h)
            .ok_or_else(|| Error::HeaderMismatch(format!("column `{h}` is not in the schema")))?;
        kinds.push(spec.kind.clone());
    }
    for spec in schema.columns() {
        let optional = opts.allow_missing_target && spec.kind == ColumnKind::Target;
        if !optional && !header.contains(&spec.name) {
            return Err(Error::HeaderMismatch(format!(
                "schema column `{}` is absent from the header",
                spec.name
            )));
        }
    }
    {
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = header.iter().find(|h| !seen.insert(h.as_str())) {
            return Err(Error::HeaderMismatch(format!("duplicate header `{dup}`")));
        }
    }

    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        if rec.len() != header.len() {
            return Err(Error::RowLength {
                row: i + 1,
                expected: header.len(),
                found: rec.len(),
            });
        }
        rows.push(rec.iter().zip(&kinds).map(|(raw, k)| parse_cell(raw, k)).collect());
    }
    Ok(RawTable {
        column_names: header,
        rows,
    })
}
