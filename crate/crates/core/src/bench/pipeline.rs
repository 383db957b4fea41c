//! End-to-end runs: ingest, validate, clean, encode, split, then fit, score
//! and cross-validate each enabled model.
//!
//! Everything is computed in memory first; [`write_outputs`] then writes all
//! files in one pass.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::artifact::{ArtifactHeader, ModelArtifact, PipelineRecord};
use super::config::ExperimentConfig;
use super::importance::{export_importance, importance_tsv};
use super::plot::PlotData;
use super::report::{ReportRow, RunReport};
use crate::data::{self, Cleaned, Dataset, Encoder, LoadOptions, RawTable, Schema, ValidationReport};
use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{FittedModel, ModelKind, ModelSpec};
use crate::select::{self, Config, FoldPlan, SearchResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: String,
    /// SHA-256 of the stage's input.
    pub input_digest: String,
    pub detail: String,
}

/// Data after every stage up to and including the split.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub schema: Schema,
    pub table: RawTable,
    pub validation: ValidationReport,
    pub cleaned: Cleaned,
    /// Per configured column, rows of the cleaned table outside the fences.
    pub outliers: Vec<(String, Vec<usize>)>,
    pub dataset: Dataset,
    pub encoder: Encoder,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub train: Dataset,
    pub test: Dataset,
    pub plan: FoldPlan,
    pub stages: Vec<StageRecord>,
}

impl Prepared {
    pub fn pipeline_record(&self) -> PipelineRecord {
        PipelineRecord::new(&self.schema, self.cleaned.fills.clone(), self.encoder.clone())
    }
}

/// One model's outcome within a run.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub kind: ModelKind,
    pub spec: ModelSpec,
    pub fitted: Option<FittedModel>,
    pub row: ReportRow,
    pub train_pred: Vec<f64>,
    pub test_pred: Vec<f64>,
    pub plot: Option<PlotData>,
    pub search: Option<SearchResult>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub models: Vec<ModelRun>,
    pub prepared: Prepared,
    pub config: ExperimentConfig,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_table(t: &RawTable) -> String {
    let mut h = Sha256::new();
    for n in &t.column_names {
        h.update(n.as_bytes());
        h.update([0x1f]);
    }
    for row in &t.rows {
        h.update([0x1e]);
        for c in row {
            let tag = match c {
                data::Cell::Missing => 0u8,
                data::Cell::Number(_) => 1,
                data::Cell::Text(_) => 2,
                data::Cell::Invalid(_) => 3,
            };
            h.update([tag]);
            match c {
                data::Cell::Number(v) => h.update(v.to_le_bytes()),
                other => h.update(other.key().as_bytes()),
            }
            h.update([0x1f]);
        }
    }
    hex(&h.finalize())
}

pub fn digest_dataset(ds: &Dataset) -> String {
    let mut h = Sha256::new();
    for n in &ds.feature_names {
        h.update(n.as_bytes());
        h.update([0x1f]);
    }
    for v in ds.x.as_slice().iter().chain(&ds.y) {
        h.update(v.to_le_bytes());
    }
    hex(&h.finalize())
}

/// Runs every data stage. Validation problems are reported, not fatal;
/// cleaning resolves them.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let mut stages = Vec::new();
    let mut log_stage = |stage: &str, input_digest: String, detail: String| {
        log::info!("stage {stage}: {detail}");
        stages.push(StageRecord {
            stage: stage.to_string(),
            input_digest,
            detail,
        });
    };

    let (schema, table, raw_digest) = (|| {
        let schema = Schema::load(&cfg.schema)?;
        let bytes = fs::read(&cfg.data).map_err(|e| Error::io(&cfg.data, e))?;
        let table = data::read_csv(bytes.as_slice(), &schema, LoadOptions::default())?;
        Ok((schema, table, hex(&Sha256::digest(&bytes))))
    })()
    .map_err(|e: Error| e.at_stage("ingest"))?;
    let source = cfg
        .data
        .file_name()
        .map_or_else(|| cfg.data.display().to_string(), |n| n.to_string_lossy().into_owned());
    log_stage(
        "ingest",
        raw_digest.clone(),
        format!("{source}: {} rows, {} columns; schema {}", table.n_rows(), table.n_cols(), schema.digest()),
    );

    let validation = data::validate(&table, &schema);
    let table_digest = digest_table(&table);
    log_stage(
        "validate",
        table_digest.clone(),
        format!(
            "{} ({} failing checks)",
            if validation.pass { "pass" } else { "fail" },
            validation.failure_count()
        ),
    );

    let cleaned = data::clean(&table, &schema).map_err(|e| e.at_stage("clean"))?;
    log_stage(
        "clean",
        table_digest,
        format!(
            "{} rows kept, {} duplicates removed, {} rows dropped, {} columns with fills",
            cleaned.table.n_rows(),
            cleaned.duplicates_removed,
            cleaned.rows_dropped,
            cleaned.fills.len()
        ),
    );
    let cleaned_digest = digest_table(&cleaned.table);

    let mut outliers = Vec::new();
    for col in &cfg.outlier_columns {
        let rows = data::detect_outliers(&cleaned.table, col, cfg.outlier_k).map_err(|e| e.at_stage("outliers"))?;
        outliers.push((col.clone(), rows.into_iter().collect::<Vec<_>>()));
    }
    if !outliers.is_empty() {
        let detail = outliers
            .iter()
            .map(|(c, r)| format!("{c}: {} flagged", r.len()))
            .collect::<Vec<_>>()
            .join(", ");
        log_stage("outliers", cleaned_digest.clone(), format!("{detail} (k = {}, reported only)", cfg.outlier_k));
    }

    let (mut dataset, encoder) =
        data::encode(&cleaned.table, &schema, cfg.target_transform).map_err(|e| e.at_stage("encode"))?;
    dataset.provenance = format!(
        "data {source} sha256 {raw_digest}; schema sha256 {}; {} rows ingested, {} duplicates removed, {} rows dropped, {} columns filled; {} features; target {}",
        schema.digest(),
        table.n_rows(),
        cleaned.duplicates_removed,
        cleaned.rows_dropped,
        cleaned.fills.len(),
        dataset.n_features(),
        cfg.target_transform
    );
    log_stage(
        "encode",
        cleaned_digest,
        format!("{} rows x {} features, target {}", dataset.n_rows(), dataset.n_features(), cfg.target_transform),
    );

    let (train_idx, test_idx) =
        data::split_indices(dataset.n_rows(), cfg.test_fraction, cfg.seed).map_err(|e| e.at_stage("split"))?;
    let train = dataset.subset(&train_idx);
    let test = dataset.subset(&test_idx);
    let plan = select::kfold_plan(train.n_rows(), cfg.folds, cfg.seed).map_err(|e| e.at_stage("split"))?;
    log_stage(
        "split",
        digest_dataset(&dataset),
        format!(
            "{} train / {} test (test fraction {}, seed {}); {} folds on train",
            train.n_rows(),
            test.n_rows(),
            cfg.test_fraction,
            cfg.seed,
            cfg.folds
        ),
    );

    Ok(Prepared {
        schema,
        table,
        validation,
        cleaned,
        outliers,
        dataset,
        encoder,
        train_idx,
        test_idx,
        train,
        test,
        plan,
        stages,
    })
}

struct Scored {
    fitted: FittedModel,
    train_pred: Vec<f64>,
    test_pred: Vec<f64>,
    model_score: f64,
    test: metrics::MetricReport,
}

fn fit_and_score(spec: &ModelSpec, p: &Prepared) -> Result<Scored> {
    let fitted = spec.fit_model(&p.train.x, &p.train.y)?;
    let train_pred = fitted.predict(&p.train.x)?;
    let test_pred = fitted.predict(&p.test.x)?;
    if train_pred.iter().chain(&test_pred).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("predictions"));
    }
    let model_score = metrics::r_squared(&p.train.y, &train_pred)?;
    let test = metrics::full_report(&p.test.y, &test_pred, p.test.n_features())?;
    Ok(Scored {
        fitted,
        train_pred,
        test_pred,
        model_score,
        test,
    })
}

fn model_run(
    spec: ModelSpec,
    p: &Prepared,
    cfg: &ExperimentConfig,
    search: Option<SearchResult>,
    cv: impl FnOnce(&ModelSpec) -> Result<f64>,
) -> (ModelRun, StageRecord) {
    let kind = spec.kind();
    let setup = spec.describe();
    let stage = StageRecord {
        stage: format!("fit {kind}"),
        input_digest: digest_dataset(&p.train),
        detail: setup.clone(),
    };
    let failed = |reason: String, search: Option<SearchResult>| ModelRun {
        kind,
        spec: spec.clone(),
        fitted: None,
        row: ReportRow::failed(kind.name(), setup.clone(), reason),
        train_pred: Vec::new(),
        test_pred: Vec::new(),
        plot: None,
        search,
    };
    let scored = match fit_and_score(&spec, p) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("{kind}: {e}");
            return (failed(e.to_string(), search), stage);
        }
    };
    let cv_score = match cv(&spec) {
        Ok(v) => v,
        Err(e) => {
            log::warn!("{kind}: cross-validation failed: {e}");
            return (failed(format!("cross-validation: {e}"), search), stage);
        }
    };
    let plot = match PlotData::new(&p.test.y, &scored.test_pred, cfg.histogram_bins) {
        Ok(pd) => pd,
        Err(e) => return (failed(format!("plot data: {e}"), search), stage),
    };
    let mut row = ReportRow::scored(kind.name(), setup, scored.model_score, &scored.test, cv_score);
    row.diagnostics.extend(scored.fitted.diagnostics());
    log::info!(
        "{kind}: train R2 {:.4}, test R2 {:.4}, cv {:.2}",
        scored.model_score,
        scored.test.r2,
        cv_score
    );
    (
        ModelRun {
            kind,
            spec: spec.clone(),
            fitted: Some(scored.fitted),
            row,
            train_pred: scored.train_pred,
            test_pred: scored.test_pred,
            plot: Some(plot),
            search,
        },
        stage,
    )
}

fn assemble(run: &str, cfg: &ExperimentConfig, mut prepared: Prepared, outcomes: Vec<(ModelRun, StageRecord)>) -> RunOutput {
    let mut models = Vec::with_capacity(outcomes.len());
    for (m, s) in outcomes {
        prepared.stages.push(s);
        models.push(m);
    }
    let report = RunReport {
        run: run.to_string(),
        seed: cfg.seed,
        target_transform: cfg.target_transform.to_string(),
        test_fraction: cfg.test_fraction,
        folds: cfg.folds,
        n_train: prepared.train.n_rows(),
        n_test: prepared.test.n_rows(),
        n_features: prepared.dataset.n_features(),
        provenance: prepared.dataset.provenance.clone(),
        rows: models.iter().map(|m| m.row.clone()).collect(),
    };
    RunOutput {
        report,
        models,
        prepared,
        config: cfg.clone(),
    }
}

/// Fits every enabled model with its configured parameters.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let prepared = prepare(cfg)?;
    run_prepared(cfg, prepared)
}

pub fn run_prepared(cfg: &ExperimentConfig, prepared: Prepared) -> Result<RunOutput> {
    let mut outcomes = Vec::new();
    for m in cfg.enabled() {
        let spec = cfg.spec(m.kind).map_err(|e| e.at_stage("fit"))?;
        outcomes.push(model_run(spec, &prepared, cfg, None, |s| {
            Ok(select::cross_validate(s, &prepared.train, &prepared.plan)?.cv_score)
        }));
    }
    Ok(assemble("default", cfg, prepared, outcomes))
}

/// Grid search on the training partition per enabled model, then a refit of
/// the winning configuration on all training rows. A model without a grid
/// is evaluated at its configured parameters only.
pub fn tune_and_run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let prepared = prepare(cfg)?;
    tune_prepared(cfg, prepared)
}

pub fn tune_prepared(cfg: &ExperimentConfig, prepared: Prepared) -> Result<RunOutput> {
    let mut outcomes = Vec::new();
    for m in cfg.enabled() {
        let base = cfg.spec(m.kind).map_err(|e| e.at_stage("tune"))?;
        let configs = if m.grid.size() == 0 { vec![Config::new()] } else { m.grid.configs() };
        log::info!("{}: searching {} configurations", m.kind, configs.len());
        let search = select::evaluate_configs(&base, configs, &prepared.train, &prepared.plan).map_err(|e| e.at_stage("tune"))?;
        let best_score = search.best_mean_score;
        if !best_score.is_finite() {
            let reason = format!("every configuration failed; first error: {}", search.evaluations[0].error.as_deref().unwrap_or("unknown"));
            let spec = base.clone();
            let stage = StageRecord {
                stage: format!("fit {}", m.kind),
                input_digest: digest_dataset(&prepared.train),
                detail: spec.describe(),
            };
            let run = ModelRun {
                kind: m.kind,
                row: ReportRow::failed(m.kind.name(), spec.describe(), reason),
                spec,
                fitted: None,
                train_pred: Vec::new(),
                test_pred: Vec::new(),
                plot: None,
                search: Some(search),
            };
            outcomes.push((run, stage));
            continue;
        }
        let spec = base.with_config(&search.best_config).map_err(|e| e.at_stage("tune"))?;
        outcomes.push(model_run(spec, &prepared, cfg, Some(search), |_| Ok(best_score)));
    }
    Ok(assemble("tuned", cfg, prepared, outcomes))
}

impl RunOutput {
    pub fn model(&self, kind: ModelKind) -> Option<&ModelRun> {
        self.models.iter().find(|m| m.kind == kind)
    }

    /// True when every enabled model produced a scored row.
    pub fn all_succeeded(&self) -> bool {
        self.report.rows.iter().all(|r| r.failed.is_none())
    }

    pub fn artifact(&self, kind: ModelKind) -> Option<ModelArtifact> {
        let m = self.model(kind)?;
        let fitted = m.fitted.clone()?;
        let header = ArtifactHeader {
            kind,
            seed: self.config.seed,
            timestamp: self.config.timestamp,
            feature_names: self.prepared.dataset.feature_names.clone(),
            setup: m.row.setup.clone(),
            metrics: Some(m.row.clone()),
        };
        Some(ModelArtifact::new(
            header,
            fitted,
            Some(self.prepared.pipeline_record()),
            self.config.target_transform,
        ))
    }

    /// The model with the highest cv_score.
    pub fn golden_kind(&self) -> Option<ModelKind> {
        let best = self.report.best_by_cv()?;
        ModelKind::parse(&best.model).ok()
    }

    pub fn importance(&self) -> Option<Result<Vec<(String, f64)>>> {
        let fitted = self.model(ModelKind::Boost)?.fitted.as_ref()?;
        Some(export_importance(
            &fitted.model,
            &self.prepared.dataset.feature_names,
            self.config.top_features,
        ))
    }

    pub fn stages_log(&self) -> String {
        let mut s = String::from("stage\tinput_sha256\tdetail\n");
        for r in &self.prepared.stages {
            let _ = writeln!(s, "{}\t{}\t{}", r.stage, r.input_digest, r.detail);
        }
        s
    }

    /// Every output file as `(relative path, contents)`, in write order.
    pub fn files(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let mut files: Vec<(String, Vec<u8>)> = vec![
            ("report.json".into(), self.report.to_json().into_bytes()),
            ("report.txt".into(), self.report.to_text().into_bytes()),
            ("validation.txt".into(), self.prepared.validation.to_text().into_bytes()),
        ];
        if !self.prepared.outliers.is_empty() {
            let mut s = String::from("column\trow\n");
            for (c, rows) in &self.prepared.outliers {
                for r in rows {
                    let _ = writeln!(s, "{c}\t{r}");
                }
            }
            files.push(("outliers.tsv".into(), s.into_bytes()));
        }
        for m in &self.models {
            if let Some(p) = &m.plot {
                files.push((format!("plots/{}_scatter.tsv", m.kind), p.scatter_tsv().into_bytes()));
                files.push((format!("plots/{}_residual_hist.tsv", m.kind), p.histogram_tsv().into_bytes()));
            }
            if let Some(s) = &m.search {
                files.push((format!("search/{}.tsv", m.kind), s.to_text().into_bytes()));
            }
            if let Some(a) = self.artifact(m.kind) {
                files.push((format!("models/{}.hrm", m.kind), a.to_bytes()));
            }
        }
        if let Some(imp) = self.importance() {
            let ranked = imp?;
            files.push(("importance.tsv".into(), importance_tsv(&ranked).into_bytes()));
        }
        if let Some(a) = self.golden_kind().and_then(|k| self.artifact(k)) {
            files.push(("golden.hrm".into(), a.to_bytes()));
        }
        files.push(("stages.log".into(), self.stages_log().into_bytes()));
        Ok(files)
    }
}

/// Writes every output file under `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    let files = out.files()?;
    for (rel, bytes) in files {
        let path = dir.join(&rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

