//! Comparison of a candidate run against the golden model.

use serde::{Deserialize, Serialize};

use super::artifact::ModelArtifact;
use super::report::{ReportRow, RunReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub metric: String,
    pub golden: Option<f64>,
    pub candidate: Option<f64>,
    /// `candidate - golden`, when both are present.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftResult {
    pub pass: bool,
    pub model: String,
    pub threshold: f64,
    pub deltas: Vec<MetricDelta>,
    pub reason: Option<String>,
}

impl DriftResult {
    pub fn cv_delta(&self) -> Option<f64> {
        self.deltas.iter().find(|d| d.metric == "cv_score").and_then(|d| d.delta)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "drift check for {}: {} (threshold {} cv points)\n",
            self.model,
            if self.pass { "PASS" } else { "FAIL" },
            self.threshold
        );
        let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
        for d in &self.deltas {
            s.push_str(&format!(
                "{:<12} golden {:>12}  candidate {:>12}  delta {:>12}\n",
                d.metric,
                show(d.golden),
                show(d.candidate),
                show(d.delta)
            ));
        }
        if let Some(r) = &self.reason {
            s.push_str(&format!("{r}\n"));
        }
        s
    }
}

fn metric_pairs(row: &ReportRow) -> [(&'static str, Option<f64>); 7] {
    [
        ("model_score", row.model_score),
        ("r2", row.r2),
        ("adj_r2", row.adj_r2),
        ("mse", row.mse),
        ("rmse", row.rmse),
        ("mae", row.mae),
        ("cv_score", row.cv_score),
    ]
}

/// Compares two report rows. The check fails when the candidate's cv_score
/// falls more than `threshold` points below the golden one, or when either
/// cv_score is missing.
pub fn compare_rows(golden: &ReportRow, candidate: &ReportRow, threshold: f64) -> DriftResult {
    let deltas: Vec<MetricDelta> = metric_pairs(golden)
        .into_iter()
        .zip(metric_pairs(candidate))
        .map(|((name, g), (_, c))| MetricDelta {
            metric: name.to_string(),
            golden: g,
            candidate: c,
            delta: g.zip(c).map(|(g, c)| c - g),
        })
        .collect();
    let (pass, reason) = match (golden.cv_score, candidate.cv_score) {
        (Some(g), Some(c)) if c < g - threshold => (
            false,
            Some(format!("candidate cv_score {c:.4} is below golden {g:.4} minus {threshold}")),
        ),
        (Some(_), Some(_)) => (true, None),
        (None, _) => (false, Some("golden model carries no cv_score".to_string())),
        (_, None) => (false, Some("candidate row carries no cv_score".to_string())),
    };
    DriftResult {
        pass,
        model: golden.model.clone(),
        threshold,
        deltas,
        reason,
    }
}

/// Checks the candidate report's row for the golden model's kind.
pub fn drift_check(golden: &ModelArtifact, candidate: &RunReport, threshold: f64) -> DriftResult {
    let kind = golden.header.kind.name();
    let golden_row = golden
        .header
        .metrics
        .clone()
        .unwrap_or_else(|| ReportRow::failed(kind, golden.header.setup.clone(), "no stored metrics".into()));
    match candidate.row(kind) {
        Some(row) => compare_rows(&golden_row, row, threshold),
        None => {
            let missing = ReportRow::failed(kind, String::new(), "absent from candidate report".into());
            let mut r = compare_rows(&golden_row, &missing, threshold);
            r.reason = Some(format!("candidate report has no `{kind}` row"));
            r
        }
    }
}
