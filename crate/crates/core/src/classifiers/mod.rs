//! Five classifier families behind one fit/predict contract.
//!
//! Every family breaks prediction ties toward the positive (failure) class.

mod forest;
mod mlp;
mod naive_bayes;
mod svm;
mod tree;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use forest::{fit_random_forest, ForestParams, RandomForestModel};
pub use mlp::{fit_mlp, MlpModel, MlpParams};
pub use naive_bayes::{fit_gaussian_nb, gaussian_density, GaussianNbModel, NbParams};
pub use svm::{fit_svm, SvmModel, SvmParams};
pub use tree::{fit_decision_tree, gini, DecisionTreeModel, TreeNode, TreeParams};

use crate::data::{FeatureDataset, FeatureMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierFamily {
    Mlp,
    Svm,
    DecisionTree,
    GaussianNb,
    RandomForest,
}

impl ClassifierFamily {
    pub const ALL: [ClassifierFamily; 5] = [
        ClassifierFamily::Mlp,
        ClassifierFamily::Svm,
        ClassifierFamily::DecisionTree,
        ClassifierFamily::GaussianNb,
        ClassifierFamily::RandomForest,
    ];

    pub fn default_spec(self) -> ClassifierSpec {
        match self {
            ClassifierFamily::Mlp => ClassifierSpec::Mlp(MlpParams::default()),
            ClassifierFamily::Svm => ClassifierSpec::Svm(SvmParams::default()),
            ClassifierFamily::DecisionTree => ClassifierSpec::DecisionTree(TreeParams::default()),
            ClassifierFamily::GaussianNb => ClassifierSpec::GaussianNb(NbParams::default()),
            ClassifierFamily::RandomForest => ClassifierSpec::RandomForest(ForestParams::default()),
        }
    }
}

impl fmt::Display for ClassifierFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierFamily::Mlp => "mlp",
            ClassifierFamily::Svm => "svm",
            ClassifierFamily::DecisionTree => "decision_tree",
            ClassifierFamily::GaussianNb => "gaussian_nb",
            ClassifierFamily::RandomForest => "random_forest",
        })
    }
}

/// Family plus hyperparameters. Defaults follow the reference settings:
/// an 11-30-30-2 MLP, an RBF SVM with `C = 100, gamma = 1`, depth-9 trees and
/// a 100-tree forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Mlp(MlpParams),
    Svm(SvmParams),
    DecisionTree(TreeParams),
    GaussianNb(NbParams),
    RandomForest(ForestParams),
}

impl ClassifierSpec {
    pub fn family(&self) -> ClassifierFamily {
        match self {
            ClassifierSpec::Mlp(_) => ClassifierFamily::Mlp,
            ClassifierSpec::Svm(_) => ClassifierFamily::Svm,
            ClassifierSpec::DecisionTree(_) => ClassifierFamily::DecisionTree,
            ClassifierSpec::GaussianNb(_) => ClassifierFamily::GaussianNb,
            ClassifierSpec::RandomForest(_) => ClassifierFamily::RandomForest,
        }
    }

    pub fn fit(&self, train: &FeatureDataset, seed: u64) -> Result<ClassifierModel> {
        Ok(match self {
            ClassifierSpec::Mlp(p) => ClassifierModel::Mlp(fit_mlp(train, p, seed)?),
            ClassifierSpec::Svm(p) => ClassifierModel::Svm(fit_svm(train, p, seed)?),
            ClassifierSpec::DecisionTree(p) => ClassifierModel::DecisionTree(fit_decision_tree(train, p, seed)?),
            ClassifierSpec::GaussianNb(p) => ClassifierModel::GaussianNb(fit_gaussian_nb(train, p)?),
            ClassifierSpec::RandomForest(p) => ClassifierModel::RandomForest(fit_random_forest(train, p, seed)?),
        })
    }
}

/// Anything that can be trained into a [`Predictor`].
pub trait Learner: Send + Sync {
    fn fit_predictor(&self, train: &FeatureDataset, seed: u64) -> Result<Box<dyn Predictor>>;
}

pub trait Predictor: Send + Sync {
    fn predict(&self, rows: &FeatureMatrix) -> Result<Vec<bool>>;
}

impl Learner for ClassifierSpec {
    fn fit_predictor(&self, train: &FeatureDataset, seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(self.fit(train, seed)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClassifierModel {
    Mlp(MlpModel),
    Svm(SvmModel),
    DecisionTree(DecisionTreeModel),
    GaussianNb(GaussianNbModel),
    RandomForest(RandomForestModel),
}

impl ClassifierModel {
    pub fn n_features(&self) -> usize {
        match self {
            ClassifierModel::Mlp(m) => m.n_features(),
            ClassifierModel::Svm(m) => m.n_features(),
            ClassifierModel::DecisionTree(m) => m.n_features(),
            ClassifierModel::GaussianNb(m) => m.n_features(),
            ClassifierModel::RandomForest(m) => m.n_features(),
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> bool {
        match self {
            ClassifierModel::Mlp(m) => m.predict_row(row),
            ClassifierModel::Svm(m) => m.predict_row(row),
            ClassifierModel::DecisionTree(m) => m.predict_row(row),
            ClassifierModel::GaussianNb(m) => m.predict_row(row),
            ClassifierModel::RandomForest(m) => m.predict_row(row),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl Predictor for ClassifierModel {
    fn predict(&self, rows: &FeatureMatrix) -> Result<Vec<bool>> {
        check_width(rows, self.n_features())?;
        Ok(rows.rows().map(|r| self.predict_row(r)).collect())
    }
}

pub(crate) fn check_width(rows: &FeatureMatrix, expected: usize) -> Result<()> {
    if rows.n_cols() != expected {
        return Err(Error::Schema(format!(
            "rows have {} features, model expects {expected}",
            rows.n_cols()
        )));
    }
    Ok(())
}

pub(crate) fn require_nonempty(train: &FeatureDataset) -> Result<()> {
    if train.is_empty() {
        return Err(Error::EmptyDataset(Some("training set".into())));
    }
    Ok(())
}

pub(crate) fn require_both_classes(train: &FeatureDataset) -> Result<()> {
    require_nonempty(train)?;
    if !train.has_both_classes() {
        return Err(Error::InvalidInput("training set must contain both classes".into()));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod test_support {
    use crate::data::{FeatureDataset, FeatureKey, FeatureSchema};
    use rand::Rng;

    pub fn schema(d: usize) -> FeatureSchema {
        FeatureSchema::new((0..d as u16).map(FeatureKey::normalized).collect())
    }

    pub fn dataset(rows: &[Vec<f64>], labels: &[bool]) -> FeatureDataset {
        FeatureDataset::from_rows(schema(rows[0].len()), rows, labels.to_vec()).unwrap()
    }

    /// Two Gaussian-ish blobs in `[-1, 1]^d`, separable when `gap` is large.
    pub fn blobs(n: usize, d: usize, gap: f64, seed: u64) -> FeatureDataset {
        let mut rng = crate::seed::rng(seed);
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let positive = i % 2 == 0;
            let centre = if positive { gap / 2.0 } else { -gap / 2.0 };
            rows.push(
                (0..d)
                    .map(|_| (centre + rng.random_range(-0.3..0.3)).clamp(-1.0, 1.0))
                    .collect::<Vec<f64>>(),
            );
            labels.push(positive);
        }
        dataset(&rows, &labels)
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::blobs;
    use super::*;

    fn quick_specs() -> Vec<ClassifierSpec> {
        vec![
            ClassifierSpec::Mlp(MlpParams {
                epochs: 30,
                ..Default::default()
            }),
            ClassifierSpec::Svm(SvmParams::default()),
            ClassifierSpec::DecisionTree(TreeParams::default()),
            ClassifierSpec::GaussianNb(NbParams::default()),
            ClassifierSpec::RandomForest(ForestParams {
                n_estimators: 7,
                ..Default::default()
            }),
        ]
    }

    #[test]
    fn uniform_contract_for_every_family() {
        let train = blobs(60, 11, 1.0, 3);
        let probe = blobs(20, 11, 1.0, 4);
        for spec in quick_specs() {
            let model = spec.fit(&train, 9).unwrap();
            assert_eq!(model.n_features(), 11);
            let empty = FeatureMatrix::empty(11);
            assert!(model.predict(&empty).unwrap().is_empty());
            let a = model.predict(probe.features()).unwrap();
            assert_eq!(a.len(), 20);
            assert_eq!(a, model.predict(probe.features()).unwrap());
            let narrow = FeatureMatrix::from_rows(&[[0.0; 10]], 10).unwrap();
            assert!(
                matches!(model.predict(&narrow), Err(Error::Schema(_))),
                "{}",
                spec.family()
            );
            // json reload reproduces predictions exactly
            let back = ClassifierModel::from_json(&model.to_json().unwrap()).unwrap();
            assert_eq!(back.predict(probe.features()).unwrap(), a);
        }
    }

    #[test]
    fn fits_are_deterministic() {
        let train = blobs(40, 11, 0.4, 5);
        for spec in quick_specs() {
            assert_eq!(
                spec.fit(&train, 2).unwrap(),
                spec.fit(&train, 2).unwrap(),
                "{}",
                spec.family()
            );
        }
    }

    #[test]
    fn empty_training_set_rejected() {
        let empty = blobs(4, 11, 1.0, 0).subset(&[]);
        for spec in quick_specs() {
            assert!(spec.fit(&empty, 0).is_err(), "{}", spec.family());
        }
    }

    #[test]
    fn spec_json_uses_family_tag_and_defaults() {
        let spec: ClassifierSpec = serde_json::from_str(r#"{"family":"svm"}"#).unwrap();
        assert_eq!(spec, ClassifierSpec::Svm(SvmParams::default()));
        let spec: ClassifierSpec = serde_json::from_str(r#"{"family":"decision_tree","max_depth":4}"#).unwrap();
        assert_eq!(
            spec,
            ClassifierSpec::DecisionTree(TreeParams {
                max_depth: 4,
                ..Default::default()
            })
        );
        for f in ClassifierFamily::ALL {
            assert_eq!(f.default_spec().family(), f);
        }
    }

    #[test]
    fn default_hyperparameters() {
        let ClassifierSpec::Mlp(m) = ClassifierFamily::Mlp.default_spec() else {
            unreachable!()
        };
        assert_eq!((m.hidden1, m.hidden2), (30, 30));
        let ClassifierSpec::Svm(s) = ClassifierFamily::Svm.default_spec() else {
            unreachable!()
        };
        assert_eq!((s.c, s.gamma), (100.0, 1.0));
        let ClassifierSpec::DecisionTree(t) = ClassifierFamily::DecisionTree.default_spec() else {
            unreachable!()
        };
        assert_eq!(t.max_depth, 9);
        let ClassifierSpec::RandomForest(r) = ClassifierFamily::RandomForest.default_spec() else {
            unreachable!()
        };
        assert_eq!(r.n_estimators, 100);
        let ClassifierSpec::GaussianNb(b) = ClassifierFamily::GaussianNb.default_spec() else {
            unreachable!()
        };
        assert_eq!(b.variance_floor, 1e-9);
    }
}
