mod common;

use common::{rng, sse_reduction, threshold_partitions};
use housereg::cart::{self, best_split, GrowthParams, TreeNode, VarianceCriterion};
use housereg::forest::{bootstrap_rows, fit_forest, tree_rng, ForestParams};
use housereg::matrix::Matrix;
use proptest::prelude::*;
use rand::Rng;

fn coarse_data(seed: u64, n: usize, d: usize) -> (Matrix, Vec<f64>) {
    let mut r = rng(seed);
    let data = (0..n * d).map(|_| r.gen_range(0..6) as f64).collect();
    let y = (0..n).map(|_| r.gen_range(-4.0..4.0)).collect();
    (Matrix::new(n, d, data).unwrap(), y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// The root split matches brute-force enumeration of every feature and
    /// threshold by squared-error reduction.
    #[test]
    fn best_split_matches_enumeration(seed in any::<u64>(), n in 2usize..25, d in 1usize..4) {
        let (x, y) = coarse_data(seed, n, d);
        let rows: Vec<usize> = (0..n).collect();
        let feats: Vec<usize> = (0..d).collect();
        let params = GrowthParams::default();
        let got = best_split(&rows, &x, &cart::variance_stats(&y), &params, &VarianceCriterion, &feats);

        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..d {
            for (t, l, r) in threshold_partitions(&x.column(f), &rows) {
                let g = sse_reduction(&y, &l, &r);
                if best.is_none_or(|b| g > b.0 + 1e-9) {
                    best = Some((g, f, t));
                }
            }
        }
        match (got, best) {
            (None, None) => {}
            (None, Some((g, _, _))) => prop_assert!(g <= 1e-9, "missed split of gain {}", g),
            (Some(c), Some((g, _, _))) => {
                prop_assert!((c.gain - g).abs() <= 1e-9 * g.max(1.0), "{} vs {}", c.gain, g);
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x.get(i, c.feature) <= c.threshold);
                prop_assert!((sse_reduction(&y, &l, &r) - g).abs() <= 1e-9 * g.max(1.0));
            }
            (Some(c), None) => prop_assert!(false, "split {:?} on constant features", c),
        }
    }

    /// Tree j of a forest is the tree grown on its own bootstrap draw.
    #[test]
    fn forest_trees_replay(seed in any::<u64>(), n in 5usize..40) {
        let (x, y) = coarse_data(seed, n, 3);
        let params = ForestParams {
            n_estimators: 4,
            growth: GrowthParams { max_depth: 4, min_samples_leaf: 1, max_features: Some(2), min_gain: 0.0 },
            bootstrap: true,
            seed,
        };
        let f = fit_forest(&x, &y, &params).unwrap();
        for (j, tree) in f.trees.iter().enumerate() {
            let mut r = tree_rng(seed, j);
            let rows = bootstrap_rows(n, &mut r);
            let replay = cart::grow(&x, &cart::variance_stats(&y), &rows, &params.growth, &VarianceCriterion, &mut r).unwrap();
            prop_assert_eq!(tree, &replay);
        }
    }

    /// More trees only append: the first M trees do not change.
    #[test]
    fn forest_prefix_is_stable(seed in any::<u64>()) {
        let (x, y) = coarse_data(seed, 30, 3);
        let small = ForestParams { n_estimators: 3, growth: GrowthParams { max_features: Some(2), ..ForestParams::default().growth }, seed, ..ForestParams::default() };
        let large = ForestParams { n_estimators: 7, ..small };
        let a = fit_forest(&x, &y, &small).unwrap();
        let b = fit_forest(&x, &y, &large).unwrap();
        prop_assert_eq!(&a.trees[..], &b.trees[..3]);
    }

    #[test]
    fn forest_predicts_tree_mean(seed in any::<u64>()) {
        let (x, y) = coarse_data(seed, 25, 2);
        let f = fit_forest(&x, &y, &ForestParams { n_estimators: 5, growth: GrowthParams { max_features: Some(1), ..ForestParams::default().growth }, seed, ..ForestParams::default() }).unwrap();
        for row in x.rows_iter() {
            let mean = f.trees.iter().map(|t| cart::predict_tree(t, row).unwrap()).sum::<f64>() / 5.0;
            prop_assert!((f.predict_row(row).unwrap() - mean).abs() < 1e-12);
        }
    }
}

#[test]
fn leaves_hold_node_means() {
    let (x, y) = coarse_data(11, 40, 2);
    let rows: Vec<usize> = (0..40).collect();
    let params = GrowthParams {
        max_depth: 3,
        ..GrowthParams::default()
    };
    let tree = cart::grow(&x, &cart::variance_stats(&y), &rows, &params, &VarianceCriterion, &mut rng(0)).unwrap();
    assert!(tree.depth() <= 3);
    tree.visit(&mut |node| {
        if let TreeNode::Leaf { value, stats, n_samples } = node {
            assert!((value - stats.g / stats.h).abs() < 1e-12);
            assert_eq!(*n_samples as f64, stats.h);
        }
    });
}

#[test]
fn text_roundtrip_is_exact() {
    let (x, y) = coarse_data(5, 30, 3);
    let rows: Vec<usize> = (0..30).collect();
    let tree = cart::grow(&x, &cart::variance_stats(&y), &rows, &GrowthParams::default(), &VarianceCriterion, &mut rng(0)).unwrap();
    assert_eq!(TreeNode::from_text(&tree.to_text()).unwrap(), tree);
}
