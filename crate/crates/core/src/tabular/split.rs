//! Dataset partitioning and class rebalancing.

use rand::seq::SliceRandom as _;

use super::{DatasetSplits, LabeledDataset, Result, TabularError};
use crate::rng::rng_from_seed;

/// Train/calibration/test fractions; must be positive and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub calibration: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, calibration: f64, test: f64) -> Result<Self> {
        let f = SplitFractions { train, calibration, test };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train > 0.0 && self.calibration > 0.0 && self.test > 0.0) {
            return Err(TabularError::InvalidArgument(format!(
                "split fractions must be positive, got ({}, {}, {})",
                self.train, self.calibration, self.test
            )));
        }
        let sum = self.train + self.calibration + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(TabularError::InvalidArgument(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Row indices of each split. Sizes are `floor(fraction * n)` with remainder
/// rows assigned to train; membership is a seeded random permutation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub calibration: Vec<usize>,
    pub test: Vec<usize>,
}

/// Computes the index partition for `n` rows. Deterministic given `seed`.
pub fn split_indices(n: usize, fractions: SplitFractions, seed: u64) -> Result<SplitIndices> {
    fractions.validate()?;
    let n_calib = (fractions.calibration * n as f64).floor() as usize;
    let n_test = (fractions.test * n as f64).floor() as usize;
    let n_train = n - n_calib - n_test; // floor(train * n) plus the remainder

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(seed);
    order.shuffle(&mut rng);

    let train = order[..n_train].to_vec();
    let calibration = order[n_train..n_train + n_calib].to_vec();
    let test = order[n_train + n_calib..].to_vec();
    Ok(SplitIndices { train, calibration, test })
}

/// Row-level random partition into train/calibration/test datasets.
pub fn split(dataset: &LabeledDataset, fractions: SplitFractions, seed: u64) -> Result<DatasetSplits> {
    let ix = split_indices(dataset.len(), fractions, seed)?;
    Ok(DatasetSplits {
        train: dataset.select(&ix.train),
        calibration: dataset.select(&ix.calibration),
        test: dataset.select(&ix.test),
    })
}

/// Randomly drops majority-class rows until both classes have the original
/// minority count. Minority rows are all retained, in their original order.
pub fn undersample_majority(dataset: &LabeledDataset, seed: u64) -> Result<LabeledDataset> {
    let n_pos = dataset.n_positive();
    let n_neg = dataset.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(TabularError::InvalidArgument(
            "undersampling requires both classes present".into(),
        ));
    }
    let (minority_label, keep) = if n_pos <= n_neg { (1u8, n_pos) } else { (0u8, n_neg) };

    let majority_rows: Vec<usize> = dataset
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, &y)| y != minority_label)
        .map(|(i, _)| i)
        .collect();
    let mut rng = rng_from_seed(seed);
    let mut sampled = majority_rows;
    sampled.shuffle(&mut rng);
    sampled.truncate(keep);

    let mut keep_row = vec![false; dataset.len()];
    for (i, &y) in dataset.labels().iter().enumerate() {
        if y == minority_label {
            keep_row[i] = true;
        }
    }
    for &i in &sampled {
        keep_row[i] = true;
    }
    let indices: Vec<usize> = (0..dataset.len()).filter(|&i| keep_row[i]).collect();
    Ok(dataset.select(&indices))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::generate_hypercube;

    #[test]
    fn paper_fractions_on_round_count() {
        let ix = split_indices(100, SplitFractions::new(0.6, 0.2, 0.2).unwrap(), 1).unwrap();
        assert_eq!((ix.train.len(), ix.calibration.len(), ix.test.len()), (60, 20, 20));
    }

    #[test]
    fn remainder_rows_go_to_train() {
        // floor(0.6*5)=3 base train rows; floor gives 1 and 1 for the other
        // two, so no remainder is left and sizes are (3, 1, 1).
        let ix = split_indices(5, SplitFractions::new(0.6, 0.2, 0.2).unwrap(), 1).unwrap();
        assert_eq!((ix.train.len(), ix.calibration.len(), ix.test.len()), (3, 1, 1));
        // 7 rows: floors are (4, 1, 1), remainder 1 lands in train.
        let ix = split_indices(7, SplitFractions::new(0.6, 0.2, 0.2).unwrap(), 1).unwrap();
        assert_eq!((ix.train.len(), ix.calibration.len(), ix.test.len()), (5, 1, 1));
    }

    #[test]
    fn seed_changes_membership_not_sizes() {
        let f = SplitFractions::new(0.5, 0.25, 0.25).unwrap();
        let a = split_indices(40, f, 1).unwrap();
        let b = split_indices(40, f, 2).unwrap();
        assert_eq!(a.train.len(), b.train.len());
        assert_eq!(a.calibration.len(), b.calibration.len());
        assert_eq!(a.test.len(), b.test.len());
        assert_ne!(a, b);
    }

    #[test]
    fn partition_is_disjoint_and_complete() {
        for n in [3usize, 10, 31, 100] {
            let ix = split_indices(n, SplitFractions::new(0.4, 0.3, 0.3).unwrap(), 5).unwrap();
            let mut seen = vec![0u8; n];
            for &i in ix.train.iter().chain(&ix.calibration).chain(&ix.test) {
                seen[i] += 1;
            }
            assert!(seen.iter().all(|&c| c == 1), "n={n}: partition not exact");
        }
    }

    #[test]
    fn fraction_sum_violation_rejected() {
        assert!(SplitFractions::new(0.6, 0.2, 0.1).is_err());
        assert!(SplitFractions::new(0.6, 0.4, 0.0).is_err());
    }

    #[test]
    fn undersample_balances_classes() {
        let ds = generate_hypercube(1000, 2, 1.0, 0.10, 11).unwrap();
        let n_pos = ds.n_positive();
        let balanced = undersample_majority(&ds, 3).unwrap();
        assert_eq!(balanced.n_positive(), n_pos);
        assert_eq!(balanced.len(), 2 * n_pos);
    }

    #[test]
    fn undersample_balanced_input_keeps_counts() {
        // Exactly balanced input: both class counts already equal the
        // minority count, so nothing is dropped.
        let ds = generate_hypercube(1000, 2, 1.0, 0.10, 11).unwrap();
        let pos: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels()[i] == 1).collect();
        let neg: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels()[i] == 0).collect();
        let k = pos.len().min(neg.len());
        let mut indices: Vec<usize> = pos[..k].to_vec();
        indices.extend_from_slice(&neg[..k]);
        indices.sort_unstable();
        let balanced = ds.select(&indices);

        let out = undersample_majority(&balanced, 3).unwrap();
        assert_eq!(out.n_positive(), k);
        assert_eq!(out.len(), 2 * k);
    }

    #[test]
    fn undersample_deterministic_and_rejects_single_class() {
        let ds = generate_hypercube(500, 2, 1.0, 0.2, 4).unwrap();
        let a = undersample_majority(&ds, 9).unwrap();
        let b = undersample_majority(&ds, 9).unwrap();
        assert_eq!(a, b);

        let single = ds.select(
            &(0..ds.len()).filter(|&i| ds.labels()[i] == 0).collect::<Vec<_>>(),
        );
        assert!(undersample_majority(&single, 0).is_err());
    }
}
