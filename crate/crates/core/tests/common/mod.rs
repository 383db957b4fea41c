//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::path::Path;

use housereg::matrix::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// |a − b| relative to the larger magnitude; exact equality counts as 0.
pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

pub fn random_matrix(r: &mut impl Rng, n: usize, d: usize, lo: f64, hi: f64) -> Matrix {
    let data = (0..n * d).map(|_| r.gen_range(lo..hi)).collect();
    Matrix::new(n, d, data).unwrap()
}

// ---------------------------------------------------------------- metrics

/// [r2, adj_r2, mse, rmse, mae], computed the textbook way.
pub fn reference_metrics(y: &[f64], yhat: &[f64], k: usize) -> [f64; 5] {
    let n = y.len();
    let mut mean = 0.0;
    for v in y {
        mean += v;
    }
    mean /= n as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut abs = 0.0;
    for i in 0..n {
        let e = y[i] - yhat[i];
        ss_res += e * e;
        ss_tot += (y[i] - mean) * (y[i] - mean);
        abs += e.abs();
    }
    let r2 = 1.0 - ss_res / ss_tot;
    let adj = if k == 0 {
        r2
    } else {
        1.0 - (1.0 - r2) * ((n - 1) as f64) / ((n - k - 1) as f64)
    };
    let mse = ss_res / n as f64;
    [r2, adj, mse, mse.sqrt(), abs / n as f64]
}

// ---------------------------------------------------------------- trees

/// Squared-error reduction of splitting `rows` at `x ≤ t`, by direct sums.
pub fn sse_reduction(y: &[f64], left: &[usize], right: &[usize]) -> f64 {
    let sse = |idx: &[usize]| {
        let m = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
        idx.iter().map(|&i| (y[i] - m) * (y[i] - m)).sum::<f64>()
    };
    let all: Vec<usize> = left.iter().chain(right).copied().collect();
    sse(&all) - sse(left) - sse(right)
}

/// Row partitions induced by every threshold between consecutive distinct
/// values of `col` over `rows`.
pub fn threshold_partitions(col: &[f64], rows: &[usize]) -> Vec<(f64, Vec<usize>, Vec<usize>)> {
    let mut vals: Vec<f64> = rows.iter().map(|&i| col[i]).collect();
    vals.sort_by(f64::total_cmp);
    vals.dedup();
    vals.windows(2)
        .map(|w| {
            let t = 0.5 * (w[0] + w[1]);
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| col[i] <= t);
            (t, l, r)
        })
        .collect()
}

/// Second-order split score from raw per-row gradients (hessians are 1).
pub fn boost_gain(g: &[f64], left: &[usize], right: &[usize], lambda: f64, gamma: f64) -> f64 {
    let gl: f64 = left.iter().map(|&i| g[i]).sum();
    let gr: f64 = right.iter().map(|&i| g[i]).sum();
    let hl = left.len() as f64;
    let hr = right.len() as f64;
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - (gl + gr) * (gl + gr) / (hl + hr + lambda)) - gamma
}

/// Exact sign of the split gain for integer targets, gradients taken at the
/// target mean. `lambda` and `gamma` are given as fractions `(num, den)`.
pub fn boost_gain_sign(y: &[i64], left: &[usize], right: &[usize], lambda: (i64, i64), gamma: (i64, i64)) -> std::cmp::Ordering {
    let n = y.len() as i128;
    let s: i128 = y.iter().map(|&v| v as i128).sum();
    // n · gᵢ = S − n·yᵢ, an integer.
    let gsum = |idx: &[usize]| idx.iter().map(|&i| s - n * y[i] as i128).sum::<i128>();
    let (gl, gr) = (gsum(left), gsum(right));
    let gp = gl + gr;
    let (a, b) = (lambda.0 as i128, lambda.1 as i128);
    let (c, e) = (gamma.0 as i128, gamma.1 as i128);
    let dl = b * left.len() as i128 + a;
    let dr = b * right.len() as i128 + a;
    let dp = b * (left.len() + right.len()) as i128 + a;
    let lhs = e * b * (gl * gl * dr * dp + gr * gr * dl * dp - gp * gp * dl * dr);
    let rhs = 2 * c * n * n * dl * dr * dp;
    lhs.cmp(&rhs)
}

// ---------------------------------------------------------------- svr

/// Dual objective over the split variables α, α* (maximization form).
pub fn svr_dual_split(k: &[f64], y: &[f64], eps: f64, a: &[f64], a_star: &[f64]) -> f64 {
    let n = y.len();
    let beta: Vec<f64> = (0..n).map(|i| a[i] - a_star[i]).collect();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += beta[i] * beta[j] * k[i * n + j];
        }
    }
    let mut lin = 0.0;
    for i in 0..n {
        lin += y[i] * beta[i] - eps * (a[i] + a_star[i]);
    }
    lin - 0.5 * quad
}

/// Euclidean projection of `v` onto {z ∈ [0, C]^2n : Σ z[..n] − Σ z[n..] = 0},
/// by bisection on the multiplier of the equality.
fn project(v: &[f64], n: usize, c: f64) -> Vec<f64> {
    let sign = |i: usize| if i < n { 1.0 } else { -1.0 };
    let at = |mu: f64| -> (Vec<f64>, f64) {
        let z: Vec<f64> = v.iter().enumerate().map(|(i, &vi)| (vi - mu * sign(i)).clamp(0.0, c)).collect();
        let s = z.iter().enumerate().map(|(i, zi)| sign(i) * zi).sum();
        (z, s)
    };
    // The constraint residual is non-increasing in mu.
    let bound = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if at(mid).1 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi)).0
}

/// Maximizes the SVR dual by accelerated projected gradient ascent.
/// Returns the optimal objective.
pub fn svr_dual_oracle(k: &[f64], y: &[f64], eps: f64, c: f64, iters: usize) -> f64 {
    let n = y.len();
    // The Hessian of the split form has spectral norm 2·λmax(K) ≤ 2·tr(K).
    let trace: f64 = (0..n).map(|i| k[i * n + i]).sum();
    let step = 1.0 / (2.0 * trace.max(1e-12));
    let grad = |z: &[f64]| -> Vec<f64> {
        let mut kb = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                kb[i] += k[i * n + j] * (z[j] - z[n + j]);
            }
        }
        let mut gr = vec![0.0; 2 * n];
        for i in 0..n {
            gr[i] = y[i] - eps - kb[i];
            gr[n + i] = -y[i] - eps + kb[i];
        }
        gr
    };
    let mut z = vec![0.0; 2 * n];
    let mut w = z.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let g = grad(&w);
        let next = project(&w.iter().zip(&g).map(|(wi, gi)| wi + step * gi).collect::<Vec<_>>(), n, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        w = next.iter().zip(&z).map(|(a, b)| a + (t - 1.0) / t_next * (a - b)).collect();
        z = next;
        t = t_next;
    }
    svr_dual_split(k, y, eps, &z[..n], &z[n..])
}

// ---------------------------------------------------------------- bench fixtures

pub const SYNTH_SCHEMA: &str = r#"
version = 1

[[column]]
name = "Id"
kind = "identifier"

[[column]]
name = "Area"
kind = "numeric"
min = 0

[[column]]
name = "Rooms"
kind = "numeric"

[[column]]
name = "Zone"
kind = "categorical"

[[column]]
name = "Quality"
kind = "ordinal"
order = ["None", "Po", "Fa", "TA", "Gd", "Ex"]

[[column]]
name = "Price"
kind = "target"
min = 0
"#;

const ZONES: [&str; 3] = ["A", "B", "C"];
const QUALS: [&str; 5] = ["Po", "Fa", "TA", "Gd", "Ex"];

/// Writes a synthetic housing CSV whose log price is exactly linear in the
/// encoded features when `noise` is zero.
pub fn write_synth_csv(path: &Path, n: usize, seed: u64, noise: f64) {
    let mut r = rng(seed);
    let mut s = String::from("Id,Area,Rooms,Zone,Quality,Price\n");
    for i in 0..n {
        let area: f64 = r.gen_range(500.0..3000.0f64).round();
        let rooms: f64 = r.gen_range(2..9) as f64;
        let zone = r.gen_range(0..ZONES.len());
        let qual = r.gen_range(0..QUALS.len());
        let log_price = 10.5 + 0.0004 * area + 0.03 * rooms + [0.0, 0.1, -0.15][zone] + 0.08 * (qual + 1) as f64
            + noise * r.gen_range(-1.0..1.0);
        let price = log_price.exp_m1();
        s.push_str(&format!("{},{},{},{},{},{:.17e}\n", i + 1, area, rooms, ZONES[zone], QUALS[qual], price));
    }
    std::fs::write(path, s).unwrap();
}

/// Writes schema, data and an experiment config into `dir`; returns the
/// config path. `models` is appended verbatim after `[experiment]`.
pub fn write_synth_experiment(dir: &Path, n: usize, seed: u64, noise: f64, models: &str) -> std::path::PathBuf {
    std::fs::write(dir.join("synth.schema.toml"), SYNTH_SCHEMA).unwrap();
    write_synth_csv(&dir.join("synth.csv"), n, seed, noise);
    let cfg = format!(
        "version = 1\n\n[experiment]\ndata = \"synth.csv\"\nschema = \"synth.schema.toml\"\nseed = {seed}\nfolds = 3\noutput = \"out\"\nhistogram_bins = 8\n\n{models}\n"
    );
    let p = dir.join("experiment.toml");
    std::fs::write(&p, cfg).unwrap();
    p
}

/// Small, fast settings for all five models.
pub const FAST_MODELS: &str = r#"
[models.forest]
params = { n_estimators = 10, max_depth = 4, max_features = 3 }

[models.boost]
params = { n_rounds = 20, max_depth = 3 }

[models.svr]
params = { C = 1.0, gamma = 0.1, max_passes = 50 }

[models.mlp]
params = { hidden_sizes = [4], max_iter = 50 }
"#;
