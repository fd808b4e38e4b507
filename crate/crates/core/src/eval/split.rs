use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Range<usize>,
    pub test: Range<usize>,
}

/// Expanding-window folds over `n` chronologically ordered samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    pub fn n_folds(&self) -> usize {
        self.folds.len()
    }
}

/// Splits off the chronologically last ⌈fraction·n⌉ items as the test set.
pub fn holdout_split<T>(items: &[T], fraction: f64) -> Result<(&[T], &[T])> {
    let n = items.len();
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(Error::Config(format!("hold-out fraction {fraction} not in (0, 0.5]")));
    }
    if n < 5 {
        return Err(Error::InsufficientData(format!("hold-out split needs at least 5 samples, got {n}")));
    }
    // Guard against 0.1·30 = 3.0000000000000004 style rounding.
    let test = ((fraction * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(items.split_at(n - test))
}

/// Folds with `test_size = ⌊n / (n_folds + 1)⌋`; fold j trains on everything
/// before its test block, so the first fold also absorbs the remainder.
pub fn time_series_split(n: usize, n_folds: usize) -> Result<FoldPlan> {
    if n_folds < 1 {
        return Err(Error::Config("need at least one fold".into()));
    }
    if n < n_folds + 1 {
        return Err(Error::Config(format!(
            "{n} samples cannot form {n_folds} folds (need at least {})",
            n_folds + 1
        )));
    }
    let test_size = n / (n_folds + 1);
    let folds = (0..n_folds)
        .map(|j| {
            let train_end = n - (n_folds - j) * test_size;
            Fold { train: 0..train_end, test: train_end..train_end + test_size }
        })
        .collect();
    Ok(FoldPlan { folds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_samples_three_folds() {
        let p = time_series_split(10, 3).unwrap();
        let got: Vec<_> = p.folds.iter().map(|f| (f.train.clone(), f.test.clone())).collect();
        assert_eq!(got, vec![(0..4, 4..6), (0..6, 6..8), (0..8, 8..10)]);
    }

    #[test]
    fn six_samples_five_folds() {
        let p = time_series_split(6, 5).unwrap();
        assert_eq!(p.n_folds(), 5);
        assert!(p.folds.iter().all(|f| f.test.len() == 1));
        assert_eq!(p.folds[0].train, 0..1);
        assert_eq!(p.folds[4].test, 5..6);
    }

    #[test]
    fn too_few_samples_is_config_error() {
        assert!(matches!(time_series_split(5, 5), Err(Error::Config(_))));
    }

    #[test]
    fn holdout_takes_latest_ceiling_fraction() {
        let items: Vec<usize> = (0..59).collect();
        let (train, test) = holdout_split(&items, 0.2).unwrap();
        assert_eq!(test.len(), 12);
        assert_eq!(test[0], 47);
        assert!(test.iter().min() > train.iter().max());

        let (_, test) = holdout_split(&items[..10], 0.5).unwrap();
        assert_eq!(test.len(), 5);
        let items30: Vec<usize> = (0..30).collect();
        assert_eq!(holdout_split(&items30, 0.1).unwrap().1.len(), 3);
    }

    #[test]
    fn holdout_rejects_bad_inputs() {
        let items = [1, 2, 3, 4];
        assert!(matches!(holdout_split(&items, 0.2), Err(Error::InsufficientData(_))));
        let items = [0; 10];
        assert!(matches!(holdout_split(&items, 0.6), Err(Error::Config(_))));
        assert!(matches!(holdout_split(&items, 0.0), Err(Error::Config(_))));
    }
}
