//! Comparison reports: one row per model, fixed column order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricReport;

/// Column headers of the text table, in order.
pub const COLUMNS: [&str; 9] = [
    "Model",
    "Experimental Setup",
    "Model Score",
    "R2",
    "Adj R2",
    "MSE",
    "RMSE",
    "MAE",
    "CV Score",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Short model name (`linreg`, `boost`, ...).
    pub model: String,
    pub setup: String,
    /// R² on the training partition.
    pub model_score: Option<f64>,
    pub r2: Option<f64>,
    pub adj_r2: Option<f64>,
    pub mse: Option<f64>,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    pub cv_score: Option<f64>,
    /// Set when the model could not be fitted or scored.
    pub failed: Option<String>,
    pub diagnostics: Vec<String>,
}

impl ReportRow {
    pub fn failed(model: &str, setup: String, reason: String) -> Self {
        ReportRow {
            model: model.to_string(),
            setup,
            model_score: None,
            r2: None,
            adj_r2: None,
            mse: None,
            rmse: None,
            mae: None,
            cv_score: None,
            failed: Some(reason),
            diagnostics: Vec::new(),
        }
    }

    pub fn scored(model: &str, setup: String, model_score: f64, test: &MetricReport, cv_score: f64) -> Self {
        ReportRow {
            model: model.to_string(),
            setup,
            model_score: Some(model_score),
            r2: Some(test.r2),
            adj_r2: Some(test.adj_r2),
            mse: Some(test.mse),
            rmse: Some(test.rmse),
            mae: Some(test.mae),
            cv_score: Some(cv_score),
            failed: None,
            diagnostics: Vec::new(),
        }
    }

    fn cells(&self) -> Vec<String> {
        let num = |v: Option<f64>, prec: usize| match v {
            Some(v) => format!("{v:.prec$}"),
            None => "failed".to_string(),
        };
        vec![
            self.model.clone(),
            self.setup.clone(),
            num(self.model_score, 4),
            num(self.r2, 4),
            num(self.adj_r2, 4),
            num(self.mse, 6),
            num(self.rmse, 6),
            num(self.mae, 6),
            num(self.cv_score, 2),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// `default` or `tuned`.
    pub run: String,
    pub seed: u64,
    pub target_transform: String,
    pub test_fraction: f64,
    pub folds: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub provenance: String,
    pub rows: Vec<ReportRow>,
}

impl RunReport {
    pub fn row(&self, model: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    /// The scored row with the highest cv_score; earlier rows win ties.
    pub fn best_by_cv(&self) -> Option<&ReportRow> {
        let mut best: Option<&ReportRow> = None;
        for r in &self.rows {
            if let Some(cv) = r.cv_score {
                if best.and_then(|b| b.cv_score).map_or(true, |b| cv > b) {
                    best = Some(r);
                }
            }
        }
        best
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad report: {e}")))
    }

    /// Aligned text table followed by any failure and diagnostic notes.
    pub fn to_text(&self) -> String {
        let mut table: Vec<Vec<String>> = vec![COLUMNS.iter().map(|c| c.to_string()).collect()];
        table.extend(self.rows.iter().map(ReportRow::cells));
        let widths: Vec<usize> = (0..COLUMNS.len())
            .map(|j| table.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut s = format!(
            "# {} run: seed {}, target {}, test fraction {}, {} folds, {} train / {} test rows, {} features\n",
            self.run, self.seed, self.target_transform, self.test_fraction, self.folds, self.n_train, self.n_test, self.n_features
        );
        for (i, row) in table.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    // text columns left-aligned, numbers right-aligned
                    if j < 2 || i == 0 {
                        format!("{c:<w$}", w = widths[j])
                    } else {
                        format!("{c:>w$}", w = widths[j])
                    }
                })
                .collect();
            s.push_str(line.join("  ").trim_end());
            s.push('\n');
        }
        for r in &self.rows {
            if let Some(f) = &r.failed {
                s.push_str(&format!("! {} failed: {f}\n", r.model));
            }
            for d in &r.diagnostics {
                s.push_str(&format!("! {}: {d}\n", r.model));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> RunReport {
        let m = MetricReport {
            r2: 0.9,
            adj_r2: 0.89,
            mse: 0.01,
            rmse: 0.1,
            mae: 0.05,
            n: 10,
            k: 1,
        };
        RunReport {
            run: "default".into(),
            seed: 0,
            target_transform: "log1p".into(),
            test_fraction: 0.2,
            folds: 5,
            n_train: 40,
            n_test: 10,
            n_features: 1,
            provenance: String::new(),
            rows: vec![
                ReportRow::scored("linreg", "fit_intercept = true".into(), 0.95, &m, 88.0),
                ReportRow::failed("svr", "C = 1".into(), "boom".into()),
                ReportRow::scored("boost", "n_rounds = 3".into(), 0.99, &m, 90.0),
            ],
        }
    }

    #[test]
    fn json_roundtrip_and_best() {
        let r = report();
        assert_eq!(RunReport::from_json(&r.to_json()).unwrap(), r);
        assert_eq!(r.best_by_cv().unwrap().model, "boost");
    }

    #[test]
    fn text_table_marks_failures() {
        let t = report().to_text();
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[1].starts_with("Model"));
        assert!(lines[1].contains("CV Score"));
        assert!(lines[3].contains("failed"));
        assert!(t.contains("! svr failed: boom"));
        assert_eq!(lines.len(), 6);
    }
}
