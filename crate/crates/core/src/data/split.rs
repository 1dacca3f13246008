use std::fmt;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use super::dataset::FeatureDataset;
use crate::error::{Error, Result};
use crate::seed;

/// Positive-to-negative class ratio, e.g. `1:100`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRatio {
    pub positive: u32,
    pub negative: u32,
}

impl ClassRatio {
    pub const fn new(positive: u32, negative: u32) -> Self {
        ClassRatio { positive, negative }
    }
}

impl Default for ClassRatio {
    fn default() -> Self {
        ClassRatio::new(1, 100)
    }
}

impl fmt::Display for ClassRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.positive, self.negative)
    }
}

/// Splits each class separately so both sides keep the class proportions
/// (to within one row). Output rows keep their input order.
pub fn stratified_split(
    ds: &FeatureDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(FeatureDataset, FeatureDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "test fraction {test_fraction} not in (0, 1)"
        )));
    }
    let mut train = Vec::with_capacity(ds.len());
    let mut test = Vec::new();
    for label in [true, false] {
        let mut idx = ds.indices_of(label);
        if idx.len() < 2 {
            return Err(Error::TooFewRows {
                required: 2,
                found: idx.len(),
            });
        }
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
        let mut rng = seed::rng(seed::derive(seed, &[label as u64]));
        idx.shuffle(&mut rng);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Keeps the limiting class whole and randomly subsamples the other to reach
/// `ratio`.
pub fn subsample_to_ratio(ds: &FeatureDataset, ratio: ClassRatio, seed: u64) -> Result<FeatureDataset> {
    let pos = ds.indices_of(true);
    let neg = ds.indices_of(false);
    let unrealizable = || Error::UnrealizableRatio {
        pos: ratio.positive,
        neg: ratio.negative,
        available_pos: pos.len(),
        available_neg: neg.len(),
    };
    if ratio.positive == 0 || ratio.negative == 0 || pos.is_empty() || neg.is_empty() {
        return Err(unrealizable());
    }
    // negatives needed when every positive is kept
    let neg_needed = (pos.len() as f64 * ratio.negative as f64 / ratio.positive as f64).round() as usize;
    let mut rng = seed::rng(seed);
    let mut keep = if neg_needed <= neg.len() {
        let mut keep = pos.clone();
        keep.extend(
            index::sample(&mut rng, neg.len(), neg_needed)
                .into_iter()
                .map(|k| neg[k]),
        );
        keep
    } else {
        let pos_needed = (neg.len() as f64 * ratio.positive as f64 / ratio.negative as f64).round() as usize;
        if pos_needed == 0 || pos_needed > pos.len() {
            return Err(unrealizable());
        }
        let mut keep = neg.clone();
        keep.extend(
            index::sample(&mut rng, pos.len(), pos_needed)
                .into_iter()
                .map(|k| pos[k]),
        );
        keep
    };
    keep.sort_unstable();
    Ok(ds.subset(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureKey, FeatureSchema};
    use proptest::prelude::*;

    fn dataset(pos: usize, neg: usize) -> FeatureDataset {
        let schema = FeatureSchema::new(vec![FeatureKey::normalized(9)]);
        let rows: Vec<[f64; 1]> = (0..pos + neg).map(|i| [i as f64]).collect();
        let labels = (0..pos + neg).map(|i| i < pos).collect();
        FeatureDataset::from_rows(schema, &rows, labels).unwrap()
    }

    #[test]
    fn exact_proportions() {
        let (train, test) = stratified_split(&dataset(10, 100), 0.3, 1).unwrap();
        assert_eq!((test.n_positive(), test.n_negative()), (3, 30));
        assert_eq!((train.n_positive(), train.n_negative()), (7, 70));
    }

    #[test]
    fn seventy_percent_split_gives_the_reference_training_composition() {
        // 246 failed and 24857 healthy drives: roughly 1:100 overall
        let (train, _) = stratified_split(&dataset(246, 24857), 0.3, 3).unwrap();
        assert_eq!((train.n_positive(), train.n_negative()), (172, 17400));
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let ds = dataset(20, 200);
        let a = stratified_split(&ds, 0.3, 42).unwrap();
        let b = stratified_split(&ds, 0.3, 42).unwrap();
        assert_eq!(a, b);
        let mut ids: Vec<u64> = a.0.real_ids().into_iter().chain(a.1.real_ids()).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..220).collect::<Vec<_>>());
        assert!(a.0.real_ids().is_disjoint(&a.1.real_ids()));
    }

    #[test]
    fn split_rejects_scarce_class() {
        assert!(matches!(
            stratified_split(&dataset(1, 50), 0.3, 0),
            Err(Error::TooFewRows { .. })
        ));
    }

    #[test]
    fn subsample_keeps_all_positives() {
        let out = subsample_to_ratio(&dataset(50, 10000), ClassRatio::new(1, 100), 5).unwrap();
        assert_eq!((out.n_positive(), out.n_negative()), (50, 5000));
        let out = subsample_to_ratio(&dataset(10, 100), ClassRatio::new(1, 1), 5).unwrap();
        assert_eq!((out.n_positive(), out.n_negative()), (10, 10));
    }

    #[test]
    fn subsample_reports_insufficient_rows() {
        let err = subsample_to_ratio(&dataset(50, 40), ClassRatio::new(1, 100), 5).unwrap_err();
        assert!(matches!(
            err,
            Error::UnrealizableRatio {
                available_pos: 50,
                available_neg: 40,
                ..
            }
        ));
    }

    #[test]
    fn subsample_trims_excess_positives() {
        let out = subsample_to_ratio(&dataset(80, 100), ClassRatio::new(1, 2), 9).unwrap();
        assert_eq!((out.n_positive(), out.n_negative()), (50, 100));
    }

    proptest! {
        #[test]
        fn class_counts_exact_for_any_seed(seed in any::<u64>(), pos in 2usize..40, neg in 2usize..200) {
            let ds = dataset(pos, neg);
            let (train, test) = stratified_split(&ds, 0.3, seed).unwrap();
            for (label, total) in [(true, pos), (false, neg)] {
                let expected = ((total as f64 * 0.3).round() as usize).clamp(1, total - 1);
                let n_test = test.labels().iter().filter(|&&l| l == label).count();
                prop_assert_eq!(n_test, expected);
                prop_assert_eq!(n_test + train.labels().iter().filter(|&&l| l == label).count(), total);
            }
        }
    }
}
