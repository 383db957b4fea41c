mod common;

use common::{random_matrix, rng};
use housereg::matrix::Matrix;
use housereg::mlp::{self, fit_mlp, Activation, MlpParams, Objective, Optimizer};
use proptest::prelude::*;
use rand::Rng;

fn activation() -> impl Strategy<Value = Activation> {
    prop_oneof![Just(Activation::Tanh), Just(Activation::Logistic)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Smooth activations only; ReLU kinks are covered by the acceptance
    /// suite's filtered check.
    #[test]
    fn gradient_matches_central_differences(
        seed in any::<u64>(),
        n in 1usize..8,
        d in 1usize..4,
        hidden in prop::collection::vec(1usize..5, 1..3),
        act in activation(),
        alpha in 0.0..0.1f64,
    ) {
        let mut r = rng(seed);
        let x = random_matrix(&mut r, n, d, -2.0, 2.0);
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        let obj = Objective::new(&x, &y, &hidden, alpha, act);
        let theta: Vec<f64> = (0..mlp::n_params(&mlp::layer_shapes(d, &hidden))).map(|_| r.gen_range(-1.0..1.0)).collect();
        let (loss, grad) = obj.loss_and_gradient(&theta);
        prop_assert!((loss - obj.loss(&theta)).abs() <= 1e-14 * loss.abs().max(1.0));
        let h = 1e-5;
        for i in 0..theta.len() {
            let mut t = theta.clone();
            t[i] += h;
            let up = obj.loss(&t);
            t[i] -= 2.0 * h;
            let down = obj.loss(&t);
            let fd = (up - down) / (2.0 * h);
            prop_assert!((fd - grad[i]).abs() <= 1e-6 * grad[i].abs().max(1.0), "coord {}: {} vs {}", i, grad[i], fd);
        }
    }

    #[test]
    fn fit_lowers_loss(seed in any::<u64>(), lbfgs in any::<bool>()) {
        let mut r = rng(seed);
        let x = random_matrix(&mut r, 20, 2, -1.0, 1.0);
        let y: Vec<f64> = x.rows_iter().map(|row| (2.0 * row[0]).sin() + row[1]).collect();
        let p = MlpParams {
            hidden_sizes: vec![6],
            max_iter: 60,
            optimizer: if lbfgs { Optimizer::Lbfgs } else { Optimizer::Gd },
            seed,
            ..MlpParams::default()
        };
        let m = fit_mlp(&x, &y, &p).unwrap();
        let first = m.loss_trace[0];
        let last = *m.loss_trace.last().unwrap();
        prop_assert!(last < first);
        for w in m.loss_trace.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }
}

#[test]
fn fit_ignores_row_order() {
    let mut r = rng(12);
    let x = random_matrix(&mut r, 15, 3, -1.0, 1.0);
    let y: Vec<f64> = (0..15).map(|_| r.gen_range(-1.0..1.0)).collect();
    let p = MlpParams {
        hidden_sizes: vec![4],
        max_iter: 30,
        ..MlpParams::default()
    };
    let a = fit_mlp(&x, &y, &p).unwrap();
    let perm: Vec<usize> = (0..15).rev().collect();
    let xb = x.select_rows(&perm);
    let yb: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
    let b = fit_mlp(&xb, &yb, &p).unwrap();
    assert_eq!(a, b);
}

#[test]
fn forward_matches_objective() {
    let mut r = rng(3);
    let x = random_matrix(&mut r, 9, 2, -1.0, 1.0);
    let y: Vec<f64> = (0..9).map(|_| r.gen_range(-1.0..1.0)).collect();
    let p = MlpParams {
        hidden_sizes: vec![3, 2],
        alpha: 0.0,
        max_iter: 10,
        ..MlpParams::default()
    };
    let m = fit_mlp(&x, &y, &p).unwrap();
    let theta = mlp::flatten(&m.layers);
    let obj = Objective::new(&x, &y, &p.hidden_sizes, 0.0, p.activation);
    let pred = m.predict(&x).unwrap();
    let data_loss = pred.iter().zip(&y).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum::<f64>() / 9.0;
    assert!((obj.loss(&theta) - data_loss).abs() < 1e-12);
}

#[test]
fn zero_width_layer_rejected() {
    let x = Matrix::new(2, 1, vec![0.0, 1.0]).unwrap();
    let p = MlpParams {
        hidden_sizes: vec![0],
        ..MlpParams::default()
    };
    assert!(fit_mlp(&x, &[0.0, 1.0], &p).is_err());
}
