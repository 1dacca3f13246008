use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::genotype::{MixRatio, N_POOLS};
use crate::data::{FeatureDataset, FeatureMatrix, RowOrigin};
use crate::error::{Error, Result};
use crate::generators::SyntheticPool;
use crate::seed;

/// Splits `need` into per-pool counts proportional to `ratio` by largest
/// remainder; equal remainders favour the lower pool index.
pub fn pool_counts(ratio: &MixRatio, need: usize) -> [usize; N_POOLS] {
    let exact = ratio.shares().map(|r| {
        let x = r * need as f64;
        // absorb representation error such as 0.3 * 100 = 30.000000000000004
        if (x - x.round()).abs() < 1e-9 {
            x.round()
        } else {
            x
        }
    });
    let mut counts = exact.map(|x| x.floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..N_POOLS).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &p in order.iter().cycle().take(need.saturating_sub(assigned)) {
        counts[p] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembly {
    pub dataset: FeatureDataset,
    pub counts: [usize; N_POOLS],
    /// Pools that were smaller than their count and sampled with replacement.
    pub with_replacement: [bool; N_POOLS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblySummary {
    pub counts: [usize; N_POOLS],
    pub with_replacement: [bool; N_POOLS],
    pub positives: usize,
    pub negatives: usize,
}

impl Assembly {
    pub fn summary(&self) -> AssemblySummary {
        AssemblySummary {
            counts: self.counts,
            with_replacement: self.with_replacement,
            positives: self.dataset.n_positive(),
            negatives: self.dataset.n_negative(),
        }
    }
}

/// All real rows plus synthetic positives drawn from the pools so that the
/// result is exactly 1:1.
pub fn assemble_balanced_set(
    real_train: &FeatureDataset,
    pools: &[SyntheticPool],
    ratio: &MixRatio,
    seed: u64,
) -> Result<Assembly> {
    if pools.len() != N_POOLS {
        return Err(Error::InvalidInput(format!(
            "expected {N_POOLS} pools, got {}",
            pools.len()
        )));
    }
    let (pos, neg) = (real_train.n_positive(), real_train.n_negative());
    if pos >= neg {
        return Err(Error::InvalidInput(format!(
            "nothing to balance: {pos} positives vs {neg} negatives"
        )));
    }
    let need = neg - pos;
    let counts = pool_counts(ratio, need);
    let mut dataset = real_train.clone();
    let mut with_replacement = [false; N_POOLS];
    for (p, pool) in pools.iter().enumerate() {
        let count = counts[p];
        if count == 0 {
            continue;
        }
        if pool.schema() != real_train.schema() {
            return Err(Error::Schema(format!("pool {p} schema differs from the training data")));
        }
        if pool.is_empty() {
            return Err(Error::InvalidInput(format!(
                "pool {p} is empty but was assigned {count} rows"
            )));
        }
        // prefixes of one seeded order: with a fixed seed, a larger count
        // only adds rows, so nearby ratios train on nearly the same data
        let mut rng = seed::rng(seed::derive(seed, &[p as u64]));
        let picks: Vec<usize> = if pool.len() >= count {
            // front-to-back Fisher-Yates, stopped after `count` steps
            let mut order: Vec<usize> = (0..pool.len()).collect();
            for i in 0..count {
                let j = rng.random_range(i..order.len());
                order.swap(i, j);
            }
            order.truncate(count);
            order
        } else {
            with_replacement[p] = true;
            (0..count).map(|_| rng.random_range(0..pool.len())).collect()
        };
        let mut rows = FeatureMatrix::empty(pool.rows().n_cols());
        let mut origins = Vec::with_capacity(count);
        for i in picks {
            rows.push_row(pool.rows().row(i))?;
            origins.push(RowOrigin::Synthetic {
                pool: p as u8,
                index: i as u32,
            });
        }
        dataset.extend_rows(&rows, true, &origins)?;
    }
    Ok(Assembly {
        dataset,
        counts,
        with_replacement,
    })
}


#[cfg(test)]
mod tests {
    use super::test_support::{imbalanced, pool};
    use super::*;
    use proptest::prelude::*;

    fn ratio(r: [f64; 3]) -> MixRatio {
        MixRatio::new(r).unwrap()
    }

    #[test]
    fn exact_counts() {
        assert_eq!(pool_counts(&ratio([0.5, 0.3, 0.2]), 100), [50, 30, 20]);
        assert_eq!(pool_counts(&ratio([1.0, 0.0, 0.0]), 17228), [17228, 0, 0]);
        assert_eq!(pool_counts(&MixRatio::uniform(), 10), [4, 3, 3]);
        assert_eq!(pool_counts(&MixRatio::uniform(), 0), [0, 0, 0]);
    }

    #[test]
    fn full_scale_assembly_is_balanced() {
        let real = imbalanced(172, 17400, 2);
        let pools = [pool(17228, 2, 0.1), pool(10, 2, 0.2), pool(10, 2, 0.3)];
        let a = assemble_balanced_set(&real, &pools, &MixRatio::single(0), 3).unwrap();
        assert_eq!(a.counts, [17228, 0, 0]);
        assert_eq!((a.dataset.n_positive(), a.dataset.n_negative()), (17400, 17400));
        assert_eq!(a.with_replacement, [false; 3]);
        // drawn without replacement: every pool row used once
        let mut idx: Vec<u32> = a
            .dataset
            .origins()
            .iter()
            .filter_map(|o| match o {
                RowOrigin::Synthetic { index, .. } => Some(*index),
                _ => None,
            })
            .collect();
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), 17228);
    }

    #[test]
    fn small_pool_drawn_with_replacement() {
        let real = imbalanced(2, 12, 2);
        let pools = [pool(3, 2, 0.1), pool(3, 2, 0.2), pool(3, 2, 0.3)];
        let a = assemble_balanced_set(&real, &pools, &ratio([0.0, 1.0, 0.0]), 0).unwrap();
        assert_eq!(a.with_replacement, [false, true, false]);
        assert_eq!(a.dataset.n_positive(), 12);
        assert_eq!(a.summary().counts, [0, 10, 0]);
    }

    #[test]
    fn errors() {
        let pools = [pool(5, 2, 0.1), pool(0, 2, 0.2), pool(5, 2, 0.3)];
        let balanced = imbalanced(4, 4, 2);
        assert!(assemble_balanced_set(&balanced, &pools, &MixRatio::single(0), 0).is_err());
        let real = imbalanced(2, 6, 2);
        assert!(assemble_balanced_set(&real, &pools, &MixRatio::single(1), 0).is_err());
        // the empty pool is fine when it gets nothing
        assert!(assemble_balanced_set(&real, &pools, &ratio([0.5, 0.0, 0.5]), 0).is_ok());
        assert!(assemble_balanced_set(&real, &pools[..2], &MixRatio::single(0), 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let real = imbalanced(3, 40, 2);
        let pools = [pool(50, 2, 0.1), pool(50, 2, 0.2), pool(50, 2, 0.3)];
        let r = MixRatio::uniform();
        assert_eq!(
            assemble_balanced_set(&real, &pools, &r, 8).unwrap(),
            assemble_balanced_set(&real, &pools, &r, 8).unwrap()
        );
    }

    #[test]
    fn larger_counts_extend_smaller_draws() {
        let real_small = imbalanced(10, 30, 2);
        let real_large = imbalanced(10, 60, 2);
        let pools = [pool(100, 2, 0.1), pool(100, 2, 0.2), pool(100, 2, 0.3)];
        let synth = |a: &Assembly| a.dataset.origins()[a.dataset.len() - a.counts[0]..].to_vec();
        let small = assemble_balanced_set(&real_small, &pools, &MixRatio::single(0), 4).unwrap();
        let large = assemble_balanced_set(&real_large, &pools, &MixRatio::single(0), 4).unwrap();
        assert_eq!(synth(&small)[..], synth(&large)[..20]);
    }

    /// Independent apportionment: hand out units one at a time to the pool
    /// furthest below its quota.
    fn greedy_counts(r: [f64; 3], need: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        for _ in 0..need {
            let mut best = 0;
            let mut gap = f64::NEG_INFINITY;
            for p in 0..3 {
                let g = r[p] * need as f64 - c[p] as f64;
                if g > gap + 1e-9 {
                    gap = g;
                    best = p;
                }
            }
            c[best] += 1;
        }
        c
    }

    proptest! {
        #[test]
        fn counts_sum_to_need(w in prop::array::uniform3(0.0f64..1.0), need in 1usize..200) {
            prop_assume!(w.iter().sum::<f64>() > 1e-6);
            let r = MixRatio::from_weights(w).unwrap();
            let c = pool_counts(&r, need);
            prop_assert_eq!(c.iter().sum::<usize>(), need);
            for p in 0..3 {
                prop_assert!((c[p] as f64 - r.shares()[p] * need as f64).abs() < 1.0 + 1e-9);
            }
            prop_assert_eq!(c, greedy_counts(r.shares(), need));
        }
    }
}
