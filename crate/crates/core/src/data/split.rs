use rand::seq::SliceRandom;

use super::encode::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// Row indices for a shuffled holdout split. The test side gets
/// `round(n * test_fraction)` rows; both sides are returned in ascending
/// row order.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParam(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::EmptyPartition {
            n,
            fraction: test_fraction,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "split", 0));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

pub fn train_test_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds.n_rows(), test_fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_follow_rounding() {
        let (tr, te) = split_indices(10, 0.2, 3).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        assert!(matches!(split_indices(10, 0.999, 3), Err(Error::EmptyPartition { .. })));
        assert!(split_indices(10, 0.01, 3).is_err());
        assert!(split_indices(10, 1.0, 3).is_err());
    }

    #[test]
    fn deterministic() {
        assert_eq!(split_indices(50, 0.3, 9).unwrap(), split_indices(50, 0.3, 9).unwrap());
        assert_ne!(split_indices(50, 0.3, 9).unwrap(), split_indices(50, 0.3, 10).unwrap());
    }
}
