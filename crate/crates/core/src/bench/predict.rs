//! Offline batch prediction from a saved artifact.

use std::path::Path;

use super::artifact::{ModelArtifact, PipelineRecord};
use crate::data::{self, ColumnKind, LoadOptions, RawTable, Schema, TargetTransform};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricReport};

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    /// Zero-based data row in the input file.
    pub row: usize,
    /// Identifier columns joined with `/`, when the input carries them.
    pub id: String,
    /// Prediction in the model's (transformed) target space.
    pub transformed: Option<f64>,
    /// Prediction in original target units.
    pub value: Option<f64>,
    /// Observed target in transformed space, when present.
    pub actual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchPredictions {
    pub rows: Vec<PredictionRow>,
    /// Unseen categories and rows that could not be encoded.
    pub warnings: Vec<String>,
    pub failed_rows: Vec<usize>,
    pub target_transform: TargetTransform,
}

impl BatchPredictions {
    pub fn transformed(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.transformed).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(["row", "id", "prediction_transformed", "prediction"]);
        let show = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for r in &self.rows {
            let _ = w.write_record([r.row.to_string(), r.id.clone(), show(r.transformed), show(r.value)]);
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 output")
    }

    /// Metrics in transformed space over rows with both a prediction and an
    /// observed target.
    pub fn metrics(&self, n_features: usize) -> Result<MetricReport> {
        let (y, p): (Vec<f64>, Vec<f64>) = self.rows.iter().filter_map(|r| r.actual.zip(r.transformed)).unzip();
        if y.is_empty() {
            return Err(Error::EmptyInput("rows with an observed target"));
        }
        metrics::full_report(&y, &p, n_features)
    }
}

fn pipeline(artifact: &ModelArtifact) -> Result<&PipelineRecord> {
    artifact
        .preprocessing
        .pipeline
        .as_ref()
        .ok_or_else(|| Error::Config("artifact carries no preprocessing pipeline; it predicts on numeric matrices only".into()))
}

/// The stored schema, after checking a caller-supplied schema against its
/// digest.
pub fn artifact_schema(artifact: &ModelArtifact, supplied: Option<&Schema>) -> Result<Schema> {
    let p = pipeline(artifact)?;
    if let Some(s) = supplied {
        let digest = s.digest();
        if digest != p.schema_digest {
            return Err(Error::SchemaDigest {
                artifact: p.schema_digest.clone(),
                supplied: digest,
            });
        }
    }
    let schema = p.schema()?;
    if schema.digest() != p.schema_digest {
        return Err(Error::Corrupt("stored schema does not match its digest".into()));
    }
    Ok(schema)
}

/// Applies the stored fills, encoding and scaling to raw rows, then the
/// model. Every input row yields an output row.
pub fn predict_table(artifact: &ModelArtifact, table: &RawTable, schema: &Schema) -> Result<BatchPredictions> {
    let p = pipeline(artifact)?;
    let filled = data::refill(table, schema, &p.fills);
    let enc = p.encoder.transform(&filled)?;
    let transform = artifact.preprocessing.target_transform;
    let actual = p.encoder.targets(&filled);
    let ok_rows: Vec<usize> = (0..table.n_rows()).filter(|i| enc.failed_rows.binary_search(i).is_err()).collect();
    let preds = artifact.predict(&enc.x.select_rows(&ok_rows))?;
    let mut by_row = vec![None; table.n_rows()];
    for (&i, &v) in ok_rows.iter().zip(&preds) {
        by_row[i] = Some(v);
    }
    let id_cols: Vec<usize> = schema
        .columns()
        .iter()
        .filter(|c| c.kind == ColumnKind::Identifier)
        .filter_map(|c| table.column_index(&c.name))
        .collect();
    let rows = (0..table.n_rows())
        .map(|i| PredictionRow {
            row: i,
            id: id_cols.iter().map(|&j| table.rows[i][j].key()).collect::<Vec<_>>().join("/"),
            transformed: by_row[i],
            value: by_row[i].map(|v| transform.invert(v)),
            actual: actual.as_ref().and_then(|a| a[i]),
        })
        .collect();
    Ok(BatchPredictions {
        rows,
        warnings: enc.warnings,
        failed_rows: enc.failed_rows,
        target_transform: transform,
    })
}

/// Reads a CSV (target column optional) and predicts every row.
pub fn predict_batch(artifact: &ModelArtifact, rows_path: &Path, supplied_schema: Option<&Schema>) -> Result<BatchPredictions> {
    let schema = artifact_schema(artifact, supplied_schema)?;
    let table = data::load_csv_with(
        rows_path,
        &schema,
        LoadOptions {
            allow_missing_target: true,
        },
    )?;
    predict_table(artifact, &table, &schema)
}
