//! Plot data: actual-vs-predicted scatter and residual histogram.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Equal-width bins over the observed range; the last bin is closed. A
/// degenerate range is widened by 0.5 on each side.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::EmptyInput("histogram data"));
    }
    if bins == 0 {
        return Err(Error::InvalidParam("histogram needs at least one bin".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("histogram data"));
    }
    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|b| lo + b as f64 * width).collect();
    edges.push(hi);
    let mut counts = vec![0; bins];
    for &v in values {
        let b = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    /// `(actual, predicted)` on the test partition.
    pub scatter: Vec<(f64, f64)>,
    /// Residuals `actual - predicted`, in scatter order.
    pub residuals: Vec<f64>,
    pub residual_histogram: Histogram,
}

impl PlotData {
    pub fn new(actual: &[f64], predicted: &[f64], bins: usize) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(Error::LengthMismatch {
                left: actual.len(),
                right: predicted.len(),
            });
        }
        let residuals: Vec<f64> = actual.iter().zip(predicted).map(|(a, p)| a - p).collect();
        Ok(PlotData {
            scatter: actual.iter().copied().zip(predicted.iter().copied()).collect(),
            residual_histogram: histogram(&residuals, bins)?,
            residuals,
        })
    }

    pub fn mean_residual(&self) -> f64 {
        self.residuals.iter().sum::<f64>() / self.residuals.len() as f64
    }

    pub fn scatter_tsv(&self) -> String {
        let mut s = String::from("actual\tpredicted\n");
        for (a, p) in &self.scatter {
            s.push_str(&format!("{a}\t{p}\n"));
        }
        s
    }

    pub fn histogram_tsv(&self) -> String {
        let h = &self.residual_histogram;
        let mut s = String::from("edge_low\tedge_high\tcount\n");
        for (b, c) in h.counts.iter().enumerate() {
            s.push_str(&format!("{}\t{}\t{c}\n", h.edges[b], h.edges[b + 1]));
        }
        s
    }

    pub fn residuals_tsv(&self) -> String {
        let mut s = String::from("residual\n");
        for r in &self.residuals {
            s.push_str(&format!("{r}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degenerate_range_widens() {
        let h = histogram(&[2.0, 2.0, 2.0], 4).unwrap();
        assert_eq!(h.edges.first(), Some(&1.5));
        assert_eq!(h.edges.last(), Some(&2.5));
        assert_eq!(h.total(), 3);
    }

    #[test]
    fn maximum_lands_in_last_bin() {
        let h = histogram(&[0.0, 1.0, 2.0, 3.0], 3).unwrap();
        assert_eq!(h.counts, vec![1, 1, 2]);
    }

    proptest! {
        #[test]
        fn counts_cover_every_residual(
            pairs in prop::collection::vec((0.0f64..20.0, 0.0f64..20.0), 1..200),
            bins in 1usize..40,
        ) {
            let (a, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let d = PlotData::new(&a, &p, bins).unwrap();
            prop_assert_eq!(d.residual_histogram.total(), a.len());
            prop_assert_eq!(d.residual_histogram.edges.len(), bins + 1);
            let h = &d.residual_histogram;
            for r in &d.residuals {
                prop_assert!(*r >= h.edges[0] && *r <= h.edges[bins]);
            }
            // mean of the residual data matches mean actual minus mean predicted
            let n = a.len() as f64;
            let direct = a.iter().sum::<f64>() / n - p.iter().sum::<f64>() / n;
            prop_assert!((d.mean_residual() - direct).abs() <= 1e-12);
        }
    }
}
