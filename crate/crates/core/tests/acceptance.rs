//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 2, 3, 4, 9 and 10 train on the bundled Ames table. Run with
//! `cargo test -p housereg --test acceptance`. Set `ACCEPTANCE_ONLY=1,5,8`
//! to run a subset; the others print SKIP.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use housereg::bench::{self, ExperimentConfig, ModelArtifact, RunOutput};
use housereg::boost::{self, BoostParams};
use housereg::cart::{self, GrowthParams, TreeNode, VarianceCriterion};
use housereg::forest::{self, ForestParams};
use housereg::matrix::Matrix;
use housereg::metrics;
use housereg::mlp::{self, Activation, Objective};
use housereg::model::ModelKind;
use housereg::svr::{self, Kernel, SvrParams};
use rand::Rng;

use common::*;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1

fn metrics_oracle() -> Check {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let n = r.gen_range(2..=200);
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(-50.0..50.0)).collect();
        let yhat: Vec<f64> = y.iter().map(|v| v + r.gen_range(-20.0..20.0)).collect();
        let k = r.gen_range(0..n - 1);
        let got = metrics::full_report(&y, &yhat, k).map_err(|e| format!("case {case}: {e}"))?;
        let want = reference_metrics(&y, &yhat, k);
        for (name, g, w) in [
            ("r2", got.r2, want[0]),
            ("adj_r2", got.adj_r2, want[1]),
            ("mse", got.mse, want[2]),
            ("rmse", got.rmse, want[3]),
            ("mae", got.mae, want[4]),
        ] {
            let e = rel_err(g, w);
            worst = worst.max(e);
            ensure(e <= 1e-12, || format!("case {case} (n={n}, k={k}): {name} {g} vs {w}"))?;
        }
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(1), || format!("took {t:.2?}"))?;
    Ok(format!("1000 cases, worst relative error {worst:.1e}, {t:.2?}"))
}

// ---------------------------------------------------------------- 2, 3, 4, 9, 10

struct Runs {
    default_a: RunOutput,
    default_a_time: Duration,
    default_b: RunOutput,
    tuned: RunOutput,
    tuned_time: Duration,
}

fn ames_config() -> ExperimentConfig {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets/ames.toml");
    ExperimentConfig::load(&p).expect("bundled Ames config loads")
}

fn ames_runs() -> Result<Runs, String> {
    let cfg = ames_config();
    let t = Instant::now();
    let default_a = bench::run_experiment(&cfg).map_err(|e| e.to_string())?;
    let default_a_time = t.elapsed();
    eprintln!("default run 1: {default_a_time:.1?}");
    let t = Instant::now();
    let default_b = bench::run_experiment(&cfg).map_err(|e| e.to_string())?;
    eprintln!("default run 2: {:.1?}", t.elapsed());
    let t = Instant::now();
    let tuned = bench::tune_and_run(&cfg).map_err(|e| e.to_string())?;
    let tuned_time = t.elapsed();
    eprintln!("tuned run: {tuned_time:.1?}");
    Ok(Runs {
        default_a,
        default_a_time,
        default_b,
        tuned,
        tuned_time,
    })
}

fn ranking(runs: &Runs) -> Check {
    let report = &runs.default_a.report;
    let mut scores = Vec::new();
    for r in &report.rows {
        ensure(r.failed.is_none(), || format!("{} failed: {:?}", r.model, r.failed))?;
        let (r2, cv) = r.r2.zip(r.cv_score).ok_or_else(|| format!("{}: missing scores", r.model))?;
        scores.push((r.model.as_str(), r2, cv));
    }
    let get = |k: ModelKind| {
        scores
            .iter()
            .find(|s| s.0 == k.name())
            .map(|s| (s.1, s.2))
            .ok_or_else(|| format!("no {k} row"))
    };
    let (boost_r2, boost_cv) = get(ModelKind::Boost)?;
    let (lin_r2, _) = get(ModelKind::Linreg)?;
    for &(name, r2, cv) in scores.iter().filter(|s| s.0 != ModelKind::Boost.name()) {
        ensure(boost_r2 > r2, || format!("{name} test R² {r2:.4} ≥ boost {boost_r2:.4}"))?;
        ensure(boost_cv > cv, || format!("{name} cv {cv:.2} ≥ boost {boost_cv:.2}"))?;
    }
    ensure(boost_r2 >= 0.88, || format!("boost test R² {boost_r2:.4} < 0.88"))?;
    ensure((0.85..=0.93).contains(&lin_r2), || format!("linreg test R² {lin_r2:.4} outside [0.85, 0.93]"))?;
    let t = runs.default_a_time;
    ensure(t < Duration::from_secs(300), || format!("train took {t:.1?}"))?;
    Ok(format!("boost R² {boost_r2:.4} cv {boost_cv:.2}; linreg R² {lin_r2:.4}; train {t:.1?}"))
}

fn tuning(runs: &Runs) -> Check {
    let cv = |out: &RunOutput, k: ModelKind| {
        out.report
            .row(k.name())
            .and_then(|r| r.cv_score)
            .ok_or_else(|| format!("no cv score for {k}"))
    };
    let mut notes = Vec::new();
    for k in [ModelKind::Linreg, ModelKind::Forest, ModelKind::Boost, ModelKind::Mlp] {
        let (d, t) = (cv(&runs.default_a, k)?, cv(&runs.tuned, k)?);
        ensure(t >= d - 0.5, || format!("{k}: tuned {t:.3} < default {d:.3} − 0.5"))?;
        notes.push(format!("{k} {d:.2}→{t:.2}"));
    }
    let (d, t) = (cv(&runs.default_a, ModelKind::Boost)?, cv(&runs.tuned, ModelKind::Boost)?);
    ensure(t >= d, || format!("boost: tuned {t:.3} < default {d:.3}"))?;
    if let (Ok(d), Ok(t)) = (cv(&runs.default_a, ModelKind::Svr), cv(&runs.tuned, ModelKind::Svr)) {
        notes.push(format!("svr {d:.2}→{t:.2} (reported only)"));
    }
    notes.push(format!("tune {:.1?}", runs.tuned_time));
    Ok(notes.join("; "))
}

fn importance(runs: &Runs) -> Check {
    let ranked = runs
        .tuned
        .importance()
        .ok_or("tuned run has no boost model")?
        .map_err(|e| e.to_string())?;
    let names: Vec<&str> = ranked.iter().map(|(n, _)| n.as_str()).collect();
    let within = |name: &str, top: usize| names.iter().take(top).any(|n| *n == name);
    for name in ["Overall Qual", "Gr Liv Area"] {
        ensure(within(name, 5), || format!("{name} not in top 5: {:?}", &names[..names.len().min(10)]))?;
    }
    for name in ["Garage Cars", "Total Bsmt SF"] {
        ensure(within(name, 10), || format!("{name} not in top 10: {:?}", &names[..names.len().min(10)]))?;
    }
    Ok(format!("top 5: {}", names[..5].join(", ")))
}

fn determinism(runs: &Runs) -> Check {
    let a = runs.default_a.files().map_err(|e| e.to_string())?;
    let b = runs.default_b.files().map_err(|e| e.to_string())?;
    ensure(a.len() == b.len(), || format!("{} vs {} output files", a.len(), b.len()))?;
    for ((na, ba), (nb, bb)) in a.iter().zip(&b) {
        ensure(na == nb, || format!("file order differs: {na} vs {nb}"))?;
        ensure(ba == bb, || format!("{na} differs between runs"))?;
    }
    let out = &runs.default_a;
    let x = &out.prepared.test.x;
    for m in &out.models {
        let art = out.artifact(m.kind).ok_or_else(|| format!("no artifact for {}", m.kind))?;
        let loaded = ModelArtifact::from_bytes(&art.to_bytes()).map_err(|e| e.to_string())?;
        let direct = m.fitted.as_ref().unwrap().predict(x).map_err(|e| e.to_string())?;
        let replayed = loaded.predict(x).map_err(|e| e.to_string())?;
        let same = direct.iter().zip(&replayed).all(|(p, q)| p.to_bits() == q.to_bits());
        ensure(same && direct.len() == replayed.len(), || format!("{}: reloaded predictions differ", m.kind))?;
    }
    Ok(format!("{} files identical; 5 artifacts replay bit-exactly", a.len()))
}

fn residuals(runs: &Runs) -> Check {
    let m = runs.tuned.model(ModelKind::Boost).ok_or("no tuned boost model")?;
    let plot = m.plot.as_ref().ok_or("tuned boost has no plot data")?;
    let mean = plot.mean_residual();
    let n_test = runs.tuned.prepared.test.n_rows();
    let total = plot.residual_histogram.total();
    ensure(mean.abs() < 0.01, || format!("|mean residual| = {:.5}", mean.abs()))?;
    ensure(total == n_test, || format!("histogram holds {total} of {n_test} rows"))?;
    Ok(format!("mean residual {mean:+.5}; histogram {total}/{n_test}"))
}

// ---------------------------------------------------------------- 5

struct BoostCase<'a> {
    x: &'a [f64],
    y: &'a [i64],
    g: &'a [f64],
    lambda: (i64, i64),
    gamma: (i64, i64),
    params: &'a BoostParams,
}

fn check_boost_tree(node: &TreeNode, c: &BoostCase, rows: &[usize], depth: usize) -> Result<(), String> {
    let p = c.params;
    let admissible: Vec<(Vec<usize>, Vec<usize>)> = if depth < p.max_depth {
        threshold_partitions(c.x, rows)
            .into_iter()
            .filter(|(_, l, r)| l.len() as f64 >= p.min_child_weight && r.len() as f64 >= p.min_child_weight)
            .map(|(_, l, r)| (l, r))
            .collect()
    } else {
        Vec::new()
    };
    // The split decision is made in exact arithmetic. When the best exact
    // gain is zero, split and leaf tie and either is accepted.
    let best_sign = admissible
        .iter()
        .map(|(l, r)| boost_gain_sign(c.y, l, r, c.lambda, c.gamma))
        .max();
    let best = admissible
        .iter()
        .map(|(l, r)| boost_gain(c.g, l, r, p.lambda, p.gamma))
        .reduce(f64::max);
    match node {
        TreeNode::Leaf { value, .. } => {
            ensure(!best_sign.is_some_and(|o| o.is_gt()), || format!("leaf where a split of gain {best:?} exists"))?;
            let gs: f64 = rows.iter().map(|&i| c.g[i]).sum();
            let w = -gs / (rows.len() as f64 + p.lambda);
            ensure((value - w).abs() <= 1e-12, || format!("leaf {value} vs −G/(H+λ) = {w}"))
        }
        TreeNode::Split {
            threshold,
            left,
            right,
            gain,
            ..
        } => {
            let best_sign = best_sign.ok_or("split where none is admissible")?;
            ensure(!best_sign.is_lt(), || format!("split of gain {gain} where every split loses"))?;
            let best = best.unwrap();
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| c.x[i] <= *threshold);
            ensure(!l.is_empty() && !r.is_empty(), || "empty child".into())?;
            ensure(boost_gain_sign(c.y, &l, &r, c.lambda, c.gamma) == best_sign, || {
                "chosen split is not an exact maximizer".into()
            })?;
            let chosen = boost_gain(c.g, &l, &r, p.lambda, p.gamma);
            ensure(chosen >= best - 1e-12, || format!("chosen gain {chosen} below best {best}"))?;
            ensure((gain - best).abs() <= 1e-12, || format!("recorded gain {gain} vs best {best}"))?;
            check_boost_tree(left, c, &l, depth + 1)?;
            check_boost_tree(right, c, &r, depth + 1)
        }
    }
}

fn boost_oracle() -> Check {
    let start = Instant::now();
    const XS: [f64; 3] = [0.0, 1.0, 2.0];
    const YS: [i64; 3] = [0, 1, 3];
    // (λ, γ, min_child_weight, depth, largest n); λ and γ as fractions.
    // The first setting covers every dataset, the others stop at n = 5.
    let settings = [
        ((1, 1), (0, 1), 1.0, 2, 6),
        ((1, 2), (0, 1), 0.0, 2, 5),
        ((1, 1), (1, 5), 1.0, 2, 5),
        ((2, 1), (0, 1), 2.0, 2, 5),
        ((1, 1), (0, 1), 1.0, 1, 5),
    ];
    let mut fits = 0usize;
    let frac = |f: (i64, i64)| f.0 as f64 / f.1 as f64;
    let mut datasets = 0usize;
    for n in 1..=6usize {
        let total = 9usize.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let mut x = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                x.push(XS[c % 3]);
                y.push(YS[(c / 3) % 3]);
                c /= 9;
            }
            let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
            let xm = Matrix::new(n, 1, x.clone()).unwrap();
            let base = yf.iter().sum::<f64>() / n as f64;
            let g: Vec<f64> = yf.iter().map(|v| base - v).collect();
            let rows: Vec<usize> = (0..n).collect();
            for &(lambda, gamma, mcw, depth, max_n) in &settings {
                if n > max_n {
                    continue;
                }
                fits += 1;
                let params = BoostParams {
                    n_rounds: 1,
                    learning_rate: 1.0,
                    lambda: frac(lambda),
                    gamma: frac(gamma),
                    max_depth: depth,
                    min_child_weight: mcw,
                    ..BoostParams::default()
                };
                let model = boost::fit_boost(&xm, &yf, &params).map_err(|e| e.to_string())?;
                let case = BoostCase {
                    x: &x,
                    y: &y,
                    g: &g,
                    lambda,
                    gamma,
                    params: &params,
                };
                check_boost_tree(&model.trees[0], &case, &rows, 0).map_err(|e| {
                    format!("x={x:?} y={y:?} λ={} γ={} mcw={mcw} depth={depth}: {e}", params.lambda, params.gamma)
                })?;
            }
            datasets += 1;
        }
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(10), || format!("took {t:.1?}"))?;
    Ok(format!("{datasets} datasets, {fits} trees checked, {t:.1?}"))
}

// ---------------------------------------------------------------- 6

fn forest_degeneracy() -> Check {
    let mut r = rng(6);
    for case in 0..50 {
        let n = r.gen_range(2..80);
        let d = r.gen_range(1..6);
        // Coarse values so ties occur.
        let data: Vec<f64> = (0..n * d).map(|_| (r.gen_range(0..12) as f64) * 0.5).collect();
        let x = Matrix::new(n, d, data).unwrap();
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(-3.0..3.0)).collect();
        let growth = GrowthParams {
            max_depth: r.gen_range(0..7),
            min_samples_leaf: r.gen_range(1..4),
            max_features: Some(d),
            min_gain: 0.0,
        };
        let params = ForestParams {
            n_estimators: 1,
            growth,
            bootstrap: false,
            seed: r.gen(),
        };
        let f = forest::fit_forest(&x, &y, &params).map_err(|e| e.to_string())?;
        let rows: Vec<usize> = (0..n).collect();
        let tree = cart::grow(&x, &cart::variance_stats(&y), &rows, &growth, &VarianceCriterion, &mut rng(case))
            .map_err(|e| e.to_string())?;
        let probe = random_matrix(&mut r, 40, d, -1.0, 7.0);
        for q in probe.rows_iter().chain(x.rows_iter()) {
            let a = f.predict_row(q).map_err(|e| e.to_string())?;
            let b = cart::predict_tree(&tree, q).map_err(|e| e.to_string())?;
            ensure(a.to_bits() == b.to_bits(), || format!("case {case}: forest {a} vs tree {b}"))?;
        }
    }
    Ok("50 instances bit-identical".into())
}

// ---------------------------------------------------------------- 7

/// Fourth-order central difference of `f` along coordinate `i`.
fn central_diff(obj: &Objective, theta: &[f64], i: usize, h: f64) -> f64 {
    let mut t = theta.to_vec();
    let mut at = |dx: f64| {
        t[i] = theta[i] + dx;
        obj.loss(&t)
    };
    let (p1, m1, p2, m2) = (at(h), at(-h), at(2.0 * h), at(-2.0 * h));
    (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h)
}

/// Smallest |pre-activation| over hidden units and rows. Weights of layer
/// `l` are stored column by column, `w[j·n_in + i]` linking input `i` to
/// unit `j`.
fn min_hidden_preactivation(shapes: &[(usize, usize)], theta: &[f64], x: &Matrix, act: Activation) -> f64 {
    let mut min = f64::INFINITY;
    for row in x.rows_iter() {
        let mut a = row.to_vec();
        let mut at = 0;
        for (l, &(n_in, n_out)) in shapes.iter().enumerate() {
            let w = &theta[at..at + n_in * n_out];
            let b = &theta[at + n_in * n_out..at + n_in * n_out + n_out];
            at += n_in * n_out + n_out;
            let z: Vec<f64> = (0..n_out)
                .map(|j| b[j] + (0..n_in).map(|i| a[i] * w[j * n_in + i]).sum::<f64>())
                .collect();
            if l + 1 == shapes.len() {
                break;
            }
            min = z.iter().fold(min, |m, v| m.min(v.abs()));
            a = z.into_iter().map(|v| act.apply(v)).collect();
        }
    }
    min
}

fn mlp_gradients() -> Check {
    let start = Instant::now();
    let mut r = rng(7);
    let mut worst = 0.0f64;
    let mut coords = 0usize;
    for case in 0..100 {
        let d = r.gen_range(1..6);
        let n = r.gen_range(1..12);
        let hidden: Vec<usize> = (0..r.gen_range(1..4)).map(|_| r.gen_range(1..7)).collect();
        let activation = [Activation::Tanh, Activation::Logistic, Activation::Relu][r.gen_range(0..3)];
        let alpha = if r.gen_bool(0.3) { 0.0 } else { r.gen_range(0.0..0.1) };
        let x = random_matrix(&mut r, n, d, -2.0, 2.0);
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        let obj = Objective::new(&x, &y, &hidden, alpha, activation);
        let shapes = mlp::layer_shapes(d, &hidden);
        // Non-zero biases so the check covers them too. ReLU draws are
        // redrawn until no unit sits near its kink, where finite differences
        // are meaningless.
        let theta = loop {
            let mut theta = mlp::init_params(&shapes, &mut r);
            for v in theta.iter_mut() {
                *v += r.gen_range(-0.3..0.3);
            }
            if activation != Activation::Relu || min_hidden_preactivation(&shapes, &theta, &x, activation) > 0.05 {
                break theta;
            }
        };
        let (_, grad) = obj.loss_and_gradient(&theta);
        for i in 0..theta.len() {
            let fd = central_diff(&obj, &theta, i, 1e-3);
            let e = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-7);
            worst = worst.max(e);
            coords += 1;
            ensure(e <= 1e-5, || {
                format!("case {case} ({activation:?}, hidden {hidden:?}) coord {i}: analytic {} vs numeric {fd}", grad[i])
            })?;
        }
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(30), || format!("took {t:.1?}"))?;
    Ok(format!("{coords} coordinates, worst relative error {worst:.1e}, {t:.2?}"))
}

// ---------------------------------------------------------------- 8

fn svr_dual() -> Check {
    let mut r = rng(8);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let d = r.gen_range(1..4);
        let x = random_matrix(&mut r, 5, d, -1.0, 1.0);
        let y: Vec<f64> = (0..5).map(|_| r.gen_range(-2.0..2.0)).collect();
        let params = SvrParams {
            c: r.gen_range(0.5..5.0),
            epsilon: r.gen_range(0.01..0.3),
            kernel: Kernel::Linear,
            ..SvrParams::default()
        };
        let k = svr::kernel_matrix(&x, &Kernel::Linear);
        let sol = svr::solve_dual(&k, &y, &params);
        let got = svr::dual_objective(&k, &y, params.epsilon, &sol.coefs);
        let want = svr_dual_oracle(&k, &y, params.epsilon, params.c, 20_000);
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= 1e-4, || format!("case {case}: objective {got} vs oracle {want}"))?;
        let sum: f64 = sol.coefs.iter().sum();
        ensure(sol.coefs.iter().all(|b| b.abs() <= params.c), || format!("case {case}: coefficient outside [−C, C]"))?;
        ensure(sum.abs() <= 1e-9, || format!("case {case}: Σβ = {sum:e}"))?;
    }
    Ok(format!("20 instances, worst objective gap {worst:.1e}"))
}

// ---------------------------------------------------------------- driver

fn selected(id: usize) -> bool {
    match std::env::var("ACCEPTANCE_ONLY") {
        Ok(list) => list.split(',').any(|s| s.trim().parse() == Ok(id)),
        Err(_) => true,
    }
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Check) -> bool {
    if !selected(id) {
        println!("criterion {id:>2} SKIP  {name}");
        return true;
    }
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let t = start.elapsed();
    match outcome {
        Ok(detail) => {
            println!("criterion {id:>2} PASS  {name}: {detail} [{t:.1?}]");
            true
        }
        Err(why) => {
            println!("criterion {id:>2} FAIL  {name}: {why} [{t:.1?}]");
            false
        }
    }
}

fn main() -> ExitCode {
    // Benchmark runs log at warn so the summary lines stay readable.
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).try_init();
    let mut ok = true;
    ok &= run(1, "metrics oracle", metrics_oracle);

    let runs = if [2, 3, 4, 9, 10].into_iter().any(selected) {
        catch_unwind(ames_runs).unwrap_or_else(|_| Err("benchmark run panicked".into()))
    } else {
        Err("not run".into())
    };
    let with_runs = |f: fn(&Runs) -> Check| match &runs {
        Ok(r) => f(r),
        Err(e) => Err(format!("benchmark run failed: {e}")),
    };
    ok &= run(2, "model ranking", || with_runs(ranking));
    ok &= run(3, "tuning effect", || with_runs(tuning));
    ok &= run(4, "feature importance", || with_runs(importance));
    ok &= run(5, "boost oracle", boost_oracle);
    ok &= run(6, "forest degeneracy", forest_degeneracy);
    ok &= run(7, "mlp gradient check", mlp_gradients);
    ok &= run(8, "svr dual optimality", svr_dual);
    ok &= run(9, "determinism", || with_runs(determinism));
    ok &= run(10, "residual sanity", || with_runs(residuals));
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
