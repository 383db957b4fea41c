use std::collections::BTreeSet;

use super::table::RawTable;
use crate::error::{Error, Result};

/// Quantile of already sorted data by linear interpolation between order
/// statistics at position `(n - 1) * q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty data");
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Tukey fences: rows whose value lies outside `[Q1 - k*IQR, Q3 + k*IQR]`.
/// Missing cells are skipped; returned indices refer to table rows.
pub fn detect_outliers(table: &RawTable, column: &str, k: f64) -> Result<BTreeSet<usize>> {
    let j = table
        .column_index(column)
        .ok_or_else(|| Error::column(column, "no such column"))?;
    let mut present = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        match &row[j] {
            super::table::Cell::Number(v) => present.push((i, *v)),
            super::table::Cell::Missing => {}
            _ => return Err(Error::column(column, "outlier detection needs a numeric column")),
        }
    }
    if present.len() < 4 {
        return Err(Error::column(
            column,
            format!("outlier detection needs at least 4 values, found {}", present.len()),
        ));
    }
    let mut sorted: Vec<f64> = present.iter().map(|&(_, v)| v).collect();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - k * iqr, q3 + k * iqr);
    Ok(present
        .into_iter()
        .filter(|&(_, v)| v < lo || v > hi)
        .map(|(i, _)| i)
        .collect())
}
