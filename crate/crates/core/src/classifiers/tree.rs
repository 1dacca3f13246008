//! CART-style binary decision tree.
//!
//! Recursion stops on a pure node, when no feature varies within the node,
//! or at `max_depth`. Continuous features split at midpoints between
//! consecutive distinct values; the split with the largest Gini impurity
//! reduction wins, earlier features and lower thresholds winning ties.
//! A feature may be reused further down the tree.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::require_nonempty;
use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Features examined per split; all when `None`.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 9,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        label: bool,
    },
    /// Rows with `row[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub root: TreeNode,
    pub(crate) n_features: usize,
}

impl DecisionTreeModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_row(&self, row: &[f64]) -> bool {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { label } => return *label,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }
}

/// Gini impurity of a node holding `pos` positives out of `n` rows.
pub fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

fn majority(pos: usize, n: usize) -> bool {
    2 * pos >= n
}

struct Builder<'a> {
    ds: &'a FeatureDataset,
    params: &'a TreeParams,
    rng: Rng,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Row indices of a node, once per feature, each sorted by that feature.
type SortedRows = Vec<Vec<usize>>;

impl Builder<'_> {
    fn value(&self, i: usize, feature: usize) -> f64 {
        self.ds.row(i)[feature]
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.ds.n_features();
        match self.params.max_features {
            Some(m) if m < d => {
                let mut f = index::sample(&mut self.rng, d, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, sorted: &SortedRows, pos: usize) -> Option<BestSplit> {
        let n = sorted[0].len();
        let parent = gini(pos, n);
        let labels = self.ds.labels();
        let mut best: Option<BestSplit> = None;
        for feature in self.candidate_features() {
            let rows = &sorted[feature];
            let mut left_pos = 0;
            for k in 0..n - 1 {
                left_pos += labels[rows[k]] as usize;
                let (lo, hi) = (self.value(rows[k], feature), self.value(rows[k + 1], feature));
                if lo == hi {
                    continue;
                }
                let nl = k + 1;
                let nr = n - nl;
                let child = (nl as f64 * gini(left_pos, nl) + nr as f64 * gini(pos - left_pos, nr)) / n as f64;
                let gain = parent - child;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mid = lo + (hi - lo) / 2.0;
                    // adjacent floats: keep `lo` on the left
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, sorted: SortedRows, depth: usize) -> TreeNode {
        let n = sorted[0].len();
        let pos = sorted[0].iter().filter(|&&i| self.ds.labels()[i]).count();
        if pos == 0 || pos == n || depth >= self.params.max_depth {
            return TreeNode::Leaf {
                label: majority(pos, n),
            };
        }
        let Some(split) = self.best_split(&sorted, pos) else {
            return TreeNode::Leaf {
                label: majority(pos, n),
            };
        };
        // stable partition keeps every per-feature list sorted
        let (mut left, mut right): (SortedRows, SortedRows) = (Vec::new(), Vec::new());
        for rows in sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = rows
                .into_iter()
                .partition(|&i| self.value(i, split.feature) <= split.threshold);
            left.push(l);
            right.push(r);
        }
        let parent_label = majority(pos, n);
        let child = |rows: SortedRows, b: &mut Self| {
            if rows[0].is_empty() {
                TreeNode::Leaf { label: parent_label }
            } else {
                b.build(rows, depth + 1)
            }
        };
        let left = child(left, self);
        let right = child(right, self);
        TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

/// Grows a tree over the rows at `indices` (duplicates allowed).
pub(crate) fn grow(ds: &FeatureDataset, indices: Vec<usize>, params: &TreeParams, seed: u64) -> DecisionTreeModel {
    let mut builder = Builder {
        ds,
        params,
        rng: seed::rng(seed),
    };
    let sorted = (0..ds.n_features())
        .map(|f| {
            let mut rows = indices.clone();
            rows.sort_by(|&a, &b| ds.row(a)[f].total_cmp(&ds.row(b)[f]));
            rows
        })
        .collect();
    DecisionTreeModel {
        root: builder.build(sorted, 0),
        n_features: ds.n_features(),
    }
}

pub fn fit_decision_tree(train: &FeatureDataset, params: &TreeParams, seed: u64) -> Result<DecisionTreeModel> {
    require_nonempty(train)?;
    if params.max_features == Some(0) {
        return Err(Error::InvalidInput("max_features must be at least 1".into()));
    }
    Ok(grow(train, (0..train.len()).collect(), params, seed))
}
