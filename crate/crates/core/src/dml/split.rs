use rand::seq::SliceRandom;

use crate::rng::{stream, Purpose};
use crate::{Error, Result};

/// Seeded train/test partition of `n` row indices. Both sides are sorted.
pub fn split_train_test(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "train fraction must lie in (0,1), got {train_fraction}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput("need at least two rows to split".into()));
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, Purpose::Split, 0));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Seeded assignment of `n` rows to `folds` near-equal folds.
pub fn assign_folds(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidInput(format!("need at least two folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::InvalidInput(format!("{n} rows cannot fill {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, Purpose::Folds, folds as u64));
    let mut fold_of = vec![0; n];
    for (rank, &row) in order.iter().enumerate() {
        fold_of[row] = rank % folds;
    }
    Ok(fold_of)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ninety_ten_on_ten_rows() {
        let (train, test) = split_train_test(10, 0.9, 1).unwrap();
        assert_eq!((train.len(), test.len()), (9, 1));
    }

    #[test]
    fn deterministic_and_disjoint() {
        let a = split_train_test(500, 0.9, 42).unwrap();
        assert_eq!(a, split_train_test(500, 0.9, 42).unwrap());
        assert_ne!(a, split_train_test(500, 0.9, 43).unwrap());
        let mut all: Vec<usize> = a.0.iter().chain(&a.1).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..500).collect::<Vec<_>>());
    }

    #[test]
    fn fraction_is_respected() {
        for seed in 0..20 {
            let (train, _) = split_train_test(1000, 0.9, seed).unwrap();
            let share = train.len() as f64 / 1000.0;
            assert!((0.899..=0.901).contains(&share));
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(split_train_test(1, 0.9, 0).is_err());
        assert!(split_train_test(10, 1.0, 0).is_err());
        assert!(split_train_test(10, 0.0, 0).is_err());
        assert!(assign_folds(10, 1, 0).is_err());
    }

    #[test]
    fn folds_are_balanced() {
        let folds = assign_folds(101, 3, 9).unwrap();
        let counts: Vec<usize> = (0..3).map(|k| folds.iter().filter(|&&f| f == k).count()).collect();
        assert_eq!(counts, vec![34, 34, 33]);
    }
}
