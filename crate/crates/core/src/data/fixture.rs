//! Synthetic SMART-like fixture: two overlapping multivariate Gaussians.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::{FeatureDataset, FeatureMatrix, RowOrigin};
use super::schema::FeatureSchema;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureSpec {
    pub positives: usize,
    pub negatives: usize,
    /// Scales the shift of the failed-drive mean away from the healthy mean.
    pub separation: f64,
    /// Standard-deviation multiplier for failed drives.
    pub positive_spread: f64,
    /// Lag-1 correlation between neighbouring features.
    pub correlation: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            positives: 100,
            negatives: 10_000,
            separation: 0.5,
            positive_spread: 1.5,
            correlation: 0.3,
        }
    }
}

// Per-feature (offset, scale) so raw values look like SMART readings, and the
// direction in which failing drives drift.
const OFFSET: [f64; 11] = [115.0, 92.0, 100.0, 8.0, 80.0, 70.0, 99.0, 98.0, 28.0, 100.0, 2.0];
const SCALE: [f64; 11] = [6.0, 2.0, 1.5, 40.0, 5.0, 12.0, 2.0, 3.0, 5.0, 1.0, 10.0];
const DRIFT: [f64; 11] = [-0.4, -0.2, -1.0, 1.0, -0.3, -0.5, -0.9, -0.2, 0.3, -0.8, 0.9];

/// Generates `spec.positives + spec.negatives` raw rows over the default
/// eleven-feature schema. Row ids run `0..n` with positives first.
pub fn generate_fixture(spec: &FixtureSpec, seed: u64) -> Result<FeatureDataset> {
    if spec.positives == 0 || spec.negatives == 0 {
        return Err(Error::Config("fixture needs both classes".into()));
    }
    if !(spec.correlation.abs() < 1.0) || spec.positive_spread <= 0.0 {
        return Err(Error::Config(
            "fixture correlation must be in (-1, 1) and spread positive".into(),
        ));
    }
    let schema = FeatureSchema::default();
    let d = schema.len();
    let mut rng = seed::rng(seed);
    let mut x = FeatureMatrix::empty(d);
    let mut labels = Vec::with_capacity(spec.positives + spec.negatives);
    let mut row = vec![0.0; d];
    let innov = (1.0 - spec.correlation * spec.correlation).sqrt();
    for i in 0..spec.positives + spec.negatives {
        let positive = i < spec.positives;
        // AR(1) draw gives correlation rho^|i-j|
        let mut z: f64 = StandardNormal.sample(&mut rng);
        for j in 0..d {
            if j > 0 {
                let e: f64 = StandardNormal.sample(&mut rng);
                z = spec.correlation * z + innov * e;
            }
            let v = if positive {
                spec.separation * DRIFT[j] * 2.0 + spec.positive_spread * z
            } else {
                z
            };
            row[j] = OFFSET[j] + SCALE[j] * v;
        }
        x.push_row(&row)?;
        labels.push(positive);
    }
    let origins = (0..labels.len() as u64).map(RowOrigin::Real).collect();
    FeatureDataset::new(schema, x, labels, origins)
}
