//! Missing-value resolution and duplicate removal.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, MissingPolicy, Schema, SENTINEL};
use super::table::{Cell, RawTable};
use crate::error::{Error, Result};

/// Value substituted for absent cells of one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Fill {
    Number(f64),
    Label(String),
}

impl Fill {
    fn to_cell(&self) -> Cell {
        match self {
            Fill::Number(v) => Cell::Number(*v),
            Fill::Label(s) => Cell::Text(s.clone()),
        }
    }
}

/// Per-column fill values, reapplied to prediction inputs.
pub type FillRecord = BTreeMap<String, Fill>;

#[derive(Debug, Clone, PartialEq)]
pub struct Cleaned {
    pub table: RawTable,
    pub fills: FillRecord,
    pub duplicates_removed: usize,
    pub rows_dropped: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct CleanOptions {
    pub drop_duplicates: bool,
}

impl Default for CleanOptions {
    fn default() -> Self {
        Self {
            drop_duplicates: true,
        }
    }
}

/// Median with the midpoint rule for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Most frequent label; ties go to the lexicographically smallest.
pub fn mode<'a>(labels: impl IntoIterator<Item = &'a str>) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let mut best: Option<(&str, usize)> = None;
    for (label, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((label, c));
        }
    }
    best.map(|(l, _)| l.to_string())
}

/// Replaces invalid, out-of-range and unknown-ordinal cells by `Missing`.
fn blank_bad_cells(table: &mut RawTable, schema: &Schema) {
    let cols: Vec<_> = table
        .column_names
        .iter()
        .map(|n| schema.get(n).cloned())
        .collect();
    for row in &mut table.rows {
        for (cell, spec) in row.iter_mut().zip(&cols) {
            let Some(spec) = spec else { continue };
            let bad = match (&*cell, &spec.kind) {
                (Cell::Invalid(_), _) => true,
                (Cell::Number(v), _) => !spec.in_range(*v),
                (Cell::Text(s), ColumnKind::Ordinal(order)) => !order.contains(s),
                _ => false,
            };
            if bad {
                *cell = Cell::Missing;
            }
        }
    }
}

fn dedupe(table: &mut RawTable, schema: &Schema) -> usize {
    let id_cols: Vec<usize> = schema
        .columns()
        .iter()
        .filter(|c| c.kind == ColumnKind::Identifier)
        .filter_map(|c| table.column_index(&c.name))
        .collect();
    let mut seen_ids: Vec<BTreeSet<String>> = vec![BTreeSet::new(); id_cols.len()];
    let mut seen_rows: BTreeSet<Vec<String>> = BTreeSet::new();
    let before = table.n_rows();
    table.retain_rows(|_, row| {
        let full: Vec<String> = row.iter().map(Cell::key).collect();
        if !seen_rows.insert(full) {
            return false;
        }
        let mut fresh = true;
        for (k, &j) in id_cols.iter().enumerate() {
            if !row[j].is_missing() && seen_ids[k].contains(&row[j].key()) {
                fresh = false;
            }
        }
        if fresh {
            for (k, &j) in id_cols.iter().enumerate() {
                if !row[j].is_missing() {
                    seen_ids[k].insert(row[j].key());
                }
            }
        }
        fresh
    });
    before - table.n_rows()
}

/// Resolves every absent cell per its column's policy.
///
/// Order: bad cells are blanked, duplicates removed, `drop_row` columns
/// filter rows, fills are computed on the surviving rows and applied, and a
/// final duplicate pass catches rows made identical by imputation. The
/// result is a fixed point: cleaning it again changes nothing.
pub fn clean(table: &RawTable, schema: &Schema) -> Result<Cleaned> {
    clean_with(table, schema, CleanOptions::default())
}

pub fn clean_with(table: &RawTable, schema: &Schema, opts: CleanOptions) -> Result<Cleaned> {
    let mut t = table.clone();
    blank_bad_cells(&mut t, schema);
    let mut duplicates_removed = if opts.drop_duplicates { dedupe(&mut t, schema) } else { 0 };

    let drop_cols: Vec<usize> = schema
        .columns()
        .iter()
        .filter(|c| c.missing == MissingPolicy::DropRow && c.kind != ColumnKind::Identifier)
        .filter_map(|c| t.column_index(&c.name))
        .collect();
    let before = t.n_rows();
    t.retain_rows(|_, row| drop_cols.iter().all(|&j| !row[j].is_missing()));
    let rows_dropped = before - t.n_rows();

    let mut fills = FillRecord::new();
    for spec in schema.columns() {
        let Some(j) = t.column_index(&spec.name) else { continue };
        let fill = match (spec.missing, &spec.kind) {
            (_, ColumnKind::Identifier) | (MissingPolicy::DropRow, _) => continue,
            (MissingPolicy::ImputeMedian, _) => {
                let present: Vec<f64> = t.rows.iter().filter_map(|r| r[j].as_number()).collect();
                let m = median(&present)
                    .ok_or_else(|| Error::column(&spec.name, "impute_median needs at least one numeric value"))?;
                Fill::Number(m)
            }
            (MissingPolicy::ImputeMode, _) => {
                let m = mode(t.rows.iter().filter_map(|r| r[j].as_text()))
                    .ok_or_else(|| Error::column(&spec.name, "impute_mode needs at least one value"))?;
                Fill::Label(m)
            }
            (MissingPolicy::SentinelCategory, _) => Fill::Label(SENTINEL.to_string()),
        };
        fills.insert(spec.name.clone(), fill);
    }
    apply_fills(&mut t, &fills);
    if opts.drop_duplicates {
        duplicates_removed += dedupe(&mut t, schema);
    }
    Ok(Cleaned {
        table: t,
        fills,
        duplicates_removed,
        rows_dropped,
    })
}

fn apply_fills(t: &mut RawTable, fills: &FillRecord) {
    let cols: Vec<Option<Cell>> = t
        .column_names
        .iter()
        .map(|n| fills.get(n).map(Fill::to_cell))
        .collect();
    for row in &mut t.rows {
        for (cell, fill) in row.iter_mut().zip(&cols) {
            if let (Cell::Missing, Some(f)) = (&*cell, fill) {
                *cell = f.clone();
            }
        }
    }
}

/// Applies training-time fills to new rows without dropping or deduplicating
/// anything, so every input row yields an output row. Cells left missing
/// (columns with a `drop_row` policy) are reported by the encoder.
pub fn refill(table: &RawTable, schema: &Schema, fills: &FillRecord) -> RawTable {
    let mut t = table.clone();
    blank_bad_cells(&mut t, schema);
    apply_fills(&mut t, fills);
    t
}
