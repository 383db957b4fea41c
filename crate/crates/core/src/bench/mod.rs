//! Benchmark harness: experiment config, end-to-end runs, reports, plot
//! data, model artifacts, batch prediction and drift checks.

pub mod artifact;
pub mod config;
pub mod drift;
pub mod importance;
pub mod pipeline;
pub mod plot;
pub mod predict;
pub mod report;

pub use artifact::{load_model, save_model, ArtifactHeader, ModelArtifact, PipelineRecord, Preprocessing, FORMAT_VERSION};
pub use config::{ExperimentConfig, ModelConfig};
pub use drift::{compare_rows, drift_check, DriftResult, MetricDelta};
pub use importance::export_importance;
pub use pipeline::{prepare, run_experiment, tune_and_run, write_outputs, ModelRun, Prepared, RunOutput};
pub use plot::{histogram, Histogram, PlotData};
pub use predict::{predict_batch, predict_table, BatchPredictions, PredictionRow};
pub use report::{ReportRow, RunReport};
