use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use housereg::bench::{self, ExperimentConfig, RunOutput, RunReport};
use housereg::data::{self, Schema};
use housereg::model::ModelKind;
use housereg::{Error, Result};

#[derive(Parser)]
#[command(name = "housereg", version, about = "House-price regression benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Data CSV; overrides the config.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Schema TOML; overrides the config.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Output directory (or file, for `predict`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated model names to run (linreg,forest,boost,svr,mlp).
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a data file against its schema.
    Validate(Common),
    /// Fit every enabled model with its configured parameters.
    Train(Common),
    /// Grid-search every enabled model, then refit the winners.
    Tune(Common),
    /// Score a saved model on a labelled CSV.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Model artifact.
        #[arg(long)]
        model: PathBuf,
    },
    /// Predict every row of a CSV with a saved model.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
    },
    /// Print the text table of a saved report.
    Report {
        #[command(flatten)]
        common: Common,
        /// Report JSON; defaults to `<out>/report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare a candidate report against the golden model.
    DriftCheck {
        #[command(flatten)]
        common: Common,
        /// Golden artifact; defaults to `<output>/default/golden.hrm`.
        #[arg(long)]
        golden: Option<PathBuf>,
        /// Candidate report; defaults to `<output>/tuned/report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Allowed cv_score drop in points; defaults to the config value.
        #[arg(long)]
        threshold: Option<f64>,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let path = c
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(d) = &c.data {
        cfg.data = d.clone();
    }
    if let Some(s) = &c.schema {
        cfg.schema = s.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(k) = c.folds {
        cfg.folds = k;
    }
    if let Some(f) = c.test_fraction {
        cfg.test_fraction = f;
    }
    if let Some(m) = &c.models {
        let kinds = m.iter().map(|s| ModelKind::parse(s.trim())).collect::<Result<Vec<_>>>()?;
        cfg.restrict_models(&kinds);
    }
    cfg.check()?;
    Ok(cfg)
}

fn finish_run(out: &RunOutput, dir: &Path) -> Result<bool> {
    bench::write_outputs(out, dir)?;
    print!("{}", out.report.to_text());
    println!("outputs written to {}", dir.display());
    Ok(out.all_succeeded())
}

fn validate(c: &Common) -> Result<bool> {
    let (data_path, schema_path) = match (&c.data, &c.schema) {
        (Some(d), Some(s)) => (d.clone(), s.clone()),
        _ => {
            let cfg = load_config(c)?;
            (cfg.data, cfg.schema)
        }
    };
    let schema = Schema::load(&schema_path)?;
    let table = data::load_csv(&data_path, &schema)?;
    let report = data::validate(&table, &schema);
    let text = report.to_text();
    print!("{text}");
    if let Some(dir) = &c.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let p = dir.join("validation.txt");
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    Ok(report.pass)
}

fn supplied_schema(c: &Common) -> Result<Option<Schema>> {
    c.schema.as_deref().map(Schema::load).transpose()
}

fn evaluate(c: &Common, model: &Path) -> Result<bool> {
    let data_path = c.data.as_ref().ok_or_else(|| Error::Config("--data is required".into()))?;
    let artifact = bench::load_model(model)?;
    let preds = bench::predict_batch(&artifact, data_path, supplied_schema(c)?.as_ref())?;
    for w in &preds.warnings {
        log::warn!("{w}");
    }
    let m = preds.metrics(artifact.header.feature_names.len())?;
    println!("model      {}", artifact.header.kind);
    println!("rows       {}", m.n);
    println!("r2         {:.6}", m.r2);
    println!("adj_r2     {:.6}", m.adj_r2);
    println!("mse        {:.6}", m.mse);
    println!("rmse       {:.6}", m.rmse);
    println!("mae        {:.6}", m.mae);
    Ok(preds.failed_rows.is_empty())
}

fn predict(c: &Common, model: &Path) -> Result<bool> {
    let data_path = c.data.as_ref().ok_or_else(|| Error::Config("--data is required".into()))?;
    let artifact = bench::load_model(model)?;
    let preds = bench::predict_batch(&artifact, data_path, supplied_schema(c)?.as_ref())?;
    for w in &preds.warnings {
        log::warn!("{w}");
    }
    let csv = preds.to_csv();
    match &c.out {
        Some(p) => std::fs::write(p, csv).map_err(|e| Error::io(p, e))?,
        None => print!("{csv}"),
    }
    Ok(preds.failed_rows.is_empty())
}

fn read_report(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunReport::from_json(&text)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate(c) => validate(&c),
        Command::Train(c) => {
            let cfg = load_config(&c)?;
            let dir = c.out.clone().unwrap_or_else(|| cfg.output.join("default"));
            finish_run(&bench::run_experiment(&cfg)?, &dir)
        }
        Command::Tune(c) => {
            let cfg = load_config(&c)?;
            let dir = c.out.clone().unwrap_or_else(|| cfg.output.join("tuned"));
            finish_run(&bench::tune_and_run(&cfg)?, &dir)
        }
        Command::Evaluate { common, model } => evaluate(&common, &model),
        Command::Predict { common, model } => predict(&common, &model),
        Command::Report { common, report } => {
            let path = match (report, &common.out) {
                (Some(p), _) => p,
                (None, Some(dir)) => dir.join("report.json"),
                (None, None) => load_config(&common)?.output.join("default").join("report.json"),
            };
            print!("{}", read_report(&path)?.to_text());
            Ok(true)
        }
        Command::DriftCheck {
            common,
            golden,
            report,
            threshold,
        } => {
            let cfg = if common.config.is_some() { Some(load_config(&common)?) } else { None };
            let from_cfg = |sub: &str, file: &str| {
                cfg.as_ref()
                    .map(|c| c.output.join(sub).join(file))
                    .ok_or_else(|| Error::Config(format!("pass --{} or --config", if file.ends_with(".hrm") { "golden" } else { "report" })))
            };
            let golden = match golden {
                Some(p) => p,
                None => from_cfg("default", "golden.hrm")?,
            };
            let report = match report {
                Some(p) => p,
                None => from_cfg("tuned", "report.json")?,
            };
            let threshold = threshold.or(cfg.as_ref().map(|c| c.drift_threshold)).unwrap_or(2.0);
            let result = bench::drift_check(&bench::load_model(&golden)?, &read_report(&report)?, threshold);
            print!("{}", result.to_text());
            Ok(result.pass)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
