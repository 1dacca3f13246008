use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::require_nonempty;
use super::tree::{grow, DecisionTreeModel, TreeParams};
use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_estimators: usize,
    /// Depth cap per tree; unlimited when `None`.
    pub max_depth: Option<usize>,
    /// Features considered per split; `ceil(sqrt(d))` when `None`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 100,
            max_depth: None,
            max_features: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<DecisionTreeModel>,
    /// Seed each tree was grown from; its bootstrap draw uses a stream
    /// derived from it.
    pub tree_seeds: Vec<u64>,
    pub features_per_split: usize,
    n_features: usize,
}

impl RandomForestModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn votes(&self, row: &[f64]) -> usize {
        self.trees.iter().filter(|t| t.predict_row(row)).count()
    }

    /// Majority vote; an even split goes to the positive class.
    pub fn predict_row(&self, row: &[f64]) -> bool {
        2 * self.votes(row) >= self.trees.len()
    }
}

/// Seed of tree `t` in a forest fitted with `seed`.
pub fn tree_seed(seed: u64, t: usize) -> u64 {
    seed::derive(seed, &[t as u64])
}

pub fn fit_random_forest(train: &FeatureDataset, params: &ForestParams, seed: u64) -> Result<RandomForestModel> {
    require_nonempty(train)?;
    if params.n_estimators == 0 {
        return Err(Error::InvalidInput("forest needs at least one tree".into()));
    }
    let d = train.n_features();
    let features_per_split = params
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d);
    let tree_params = TreeParams {
        max_depth: params.max_depth.unwrap_or(usize::MAX),
        max_features: Some(features_per_split),
    };
    let n = train.len();
    let tree_seeds: Vec<u64> = (0..params.n_estimators).map(|t| tree_seed(seed, t)).collect();
    let trees = tree_seeds
        .iter()
        .map(|&s| {
            let indices = if params.bootstrap {
                let mut rng = seed::rng(seed::derive(s, &[seed::tag("bootstrap")]));
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(train, indices, &tree_params, s)
        })
        .collect();
    Ok(RandomForestModel {
        trees,
        tree_seeds,
        features_per_split,
        n_features: d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::test_support::{blobs, dataset};
    use crate::classifiers::{fit_decision_tree, TreeNode};

    #[test]
    fn default_considers_four_of_eleven_features() {
        let m = fit_random_forest(
            &blobs(30, 11, 1.0, 0),
            &ForestParams {
                n_estimators: 3,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        assert_eq!(m.features_per_split, 4);
        assert_eq!(m.trees.len(), 3);
    }

    #[test]
    fn single_unbootstrapped_tree_matches_decision_tree() {
        let ds = blobs(120, 11, 0.3, 2);
        let probe = blobs(200, 11, 0.3, 3);
        let params = ForestParams {
            n_estimators: 1,
            bootstrap: false,
            max_depth: Some(9),
            max_features: None,
        };
        let forest = fit_random_forest(&ds, &params, 77).unwrap();
        let tree = fit_decision_tree(
            &ds,
            &TreeParams {
                max_depth: 9,
                max_features: Some(4),
            },
            tree_seed(77, 0),
        )
        .unwrap();
        for row in probe.features().rows() {
            assert_eq!(forest.predict_row(row), tree.predict_row(row));
        }
    }

    #[test]
    fn full_features_single_tree_equals_plain_tree() {
        let ds = blobs(90, 5, 0.2, 8);
        let params = ForestParams {
            n_estimators: 1,
            bootstrap: false,
            max_depth: Some(9),
            max_features: Some(5),
        };
        let forest = fit_random_forest(&ds, &params, 1).unwrap();
        let tree = fit_decision_tree(&ds, &TreeParams::default(), 123).unwrap();
        assert_eq!(forest.trees[0].root, tree.root);
    }

    #[test]
    fn single_class_forest_predicts_that_class() {
        let ds = dataset(&[vec![0.1], vec![0.7], vec![-0.3]], &[true, true, true]);
        let m = fit_random_forest(
            &ds,
            &ForestParams {
                n_estimators: 5,
                ..Default::default()
            },
            4,
        )
        .unwrap();
        assert!(m.trees.iter().all(|t| t.root == TreeNode::Leaf { label: true }));
        assert!(m.predict_row(&[-5.0]));
    }

    #[test]
    fn even_vote_split_goes_positive() {
        let leaf = |label| DecisionTreeModel {
            root: TreeNode::Leaf { label },
            n_features: 1,
        };
        let m = RandomForestModel {
            trees: vec![leaf(true), leaf(false), leaf(false), leaf(true)],
            tree_seeds: vec![0; 4],
            features_per_split: 1,
            n_features: 1,
        };
        assert_eq!(m.votes(&[0.0]), 2);
        assert!(m.predict_row(&[0.0]));
    }
}
