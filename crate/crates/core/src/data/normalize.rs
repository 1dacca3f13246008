//! Two-stage scaling: z-score with training moments, then min-max onto
//! `[-1, 1]` using the z-scored training extremes.

use serde::{Deserialize, Serialize};

use super::dataset::FeatureDataset;
use super::schema::FeatureSchema;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub mean: f64,
    pub stddev: f64,
    /// Minimum of the z-scored training values.
    pub min: f64,
    /// Maximum of the z-scored training values.
    pub max: f64,
    /// Zero-variance feature; always maps to 0.
    pub constant: bool,
}

impl FeatureScale {
    pub fn apply(&self, x: f64) -> f64 {
        if self.constant {
            return 0.0;
        }
        let z = (x - self.mean) / self.stddev;
        (2.0 * (z - self.min) / (self.max - self.min) - 1.0).clamp(-1.0, 1.0)
    }

    /// Maps a scaled value back to its z-score.
    pub fn invert_to_zscore(&self, v: f64) -> f64 {
        if self.constant {
            return 0.0;
        }
        (v + 1.0) / 2.0 * (self.max - self.min) + self.min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizerParams {
    pub schema: FeatureSchema,
    pub features: Vec<FeatureScale>,
}

impl NormalizerParams {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let params: NormalizerParams = serde_json::from_str(s)?;
        if params.features.len() != params.schema.len() {
            return Err(Error::Schema("normalizer feature count differs from schema".into()));
        }
        Ok(params)
    }
}

/// Fits per-feature scaling on training rows only.
pub fn fit_normalizer(train: &FeatureDataset) -> Result<NormalizerParams> {
    if train.is_empty() {
        return Err(Error::EmptyDataset(Some("cannot fit normalizer".into())));
    }
    let n = train.len() as f64;
    let x = train.features();
    let features = (0..train.n_features())
        .map(|j| {
            let mean = x.column(j).sum::<f64>() / n;
            // population stddev, as StandardScaler
            let var = x.column(j).map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let stddev = var.sqrt();
            if stddev <= 1e-12 * mean.abs().max(1.0) {
                return FeatureScale {
                    mean,
                    stddev,
                    min: 0.0,
                    max: 0.0,
                    constant: true,
                };
            }
            let (min, max) = x
                .column(j)
                .map(|v| (v - mean) / stddev)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| (lo.min(z), hi.max(z)));
            FeatureScale {
                mean,
                stddev,
                min,
                max,
                constant: min >= max,
            }
        })
        .collect();
    Ok(NormalizerParams {
        schema: train.schema().clone(),
        features,
    })
}

/// Scales every value into `[-1, 1]`; values beyond the training range clamp.
pub fn apply_normalizer(params: &NormalizerParams, ds: &FeatureDataset) -> Result<FeatureDataset> {
    if ds.schema() != &params.schema {
        return Err(Error::Schema("dataset schema differs from normalizer schema".into()));
    }
    let width = ds.n_features();
    let mut out = ds.clone();
    for (k, v) in out.features_mut().as_mut_slice().iter_mut().enumerate() {
        *v = params.features[k % width].apply(*v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureKey, FeatureSchema};
    use proptest::prelude::*;

    fn one_feature(values: &[f64]) -> FeatureDataset {
        let schema = FeatureSchema::new(vec![FeatureKey::normalized(194)]);
        let rows: Vec<[f64; 1]> = values.iter().map(|&v| [v]).collect();
        FeatureDataset::from_rows(schema, &rows, vec![false; values.len()]).unwrap()
    }

    #[test]
    fn two_points_are_symmetric() {
        let p = fit_normalizer(&one_feature(&[2.0, 4.0])).unwrap();
        let f = p.features[0];
        assert_eq!(f.mean, 3.0);
        assert_eq!(f.stddev, 1.0);
        assert_eq!(f.min, -f.max);
    }

    #[test]
    fn constant_feature_is_flagged_and_maps_to_zero() {
        let ds = one_feature(&[5.0, 5.0, 5.0]);
        let p = fit_normalizer(&ds).unwrap();
        assert!(p.features[0].constant);
        let out = apply_normalizer(&p, &ds).unwrap();
        assert!(out.features().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn extremes_and_midpoint() {
        let ds = one_feature(&[1.0, 2.0, 3.0, 4.0]);
        let p = fit_normalizer(&ds).unwrap();
        let out = apply_normalizer(&p, &ds).unwrap();
        let v = out.features().as_slice();
        assert_eq!(v[0], -1.0);
        assert_eq!(v[3], 1.0);
        let mid = apply_normalizer(&p, &one_feature(&[2.5])).unwrap();
        assert!(mid.row(0)[0].abs() < 1e-12);
    }

    #[test]
    fn out_of_range_values_clamp() {
        let p = fit_normalizer(&one_feature(&[1.0, 2.0, 3.0])).unwrap();
        let out = apply_normalizer(&p, &one_feature(&[-50.0, 50.0])).unwrap();
        assert_eq!(out.features().as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        assert!(fit_normalizer(&one_feature(&[])).is_err());
        let p = fit_normalizer(&one_feature(&[1.0, 2.0])).unwrap();
        let other =
            FeatureDataset::from_rows(FeatureSchema::new(vec![FeatureKey::raw(5)]), &[[1.0]], vec![true]).unwrap();
        assert!(matches!(apply_normalizer(&p, &other), Err(Error::Schema(_))));
    }

    #[test]
    fn json_round_trip() {
        let p = fit_normalizer(&one_feature(&[0.3, 1.7, 9.1])).unwrap();
        assert_eq!(NormalizerParams::from_json(&p.to_json().unwrap()).unwrap(), p);
    }

    proptest! {
        #[test]
        fn training_values_land_in_range_and_invert(values in prop::collection::vec(-1e6f64..1e6, 2..40)) {
            let ds = one_feature(&values);
            let p = fit_normalizer(&ds).unwrap();
            let out = apply_normalizer(&p, &ds).unwrap();
            let f = p.features[0];
            for (&x, &v) in values.iter().zip(out.features().as_slice()) {
                prop_assert!((-1.0..=1.0).contains(&v));
                if !f.constant {
                    let z = (x - f.mean) / f.stddev;
                    prop_assert!((f.invert_to_zscore(v) - z).abs() <= 1e-9 * z.abs().max(1.0));
                }
            }
        }

        #[test]
        fn scaling_preserves_rank(values in prop::collection::vec(-1e3f64..1e3, 2..40), alpha in 0.01f64..100.0) {
            let scaled: Vec<f64> = values.iter().map(|v| v * alpha).collect();
            let ds = one_feature(&scaled);
            let out = apply_normalizer(&fit_normalizer(&ds).unwrap(), &ds).unwrap();
            let v = out.features().as_slice();
            for i in 0..values.len() {
                for k in 0..values.len() {
                    if values[i] < values[k] {
                        prop_assert!(v[i] <= v[k]);
                    }
                }
            }
        }
    }
}
