use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::require_both_classes;
use crate::data::FeatureDataset;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NbParams {
    /// Added to every per-class variance.
    pub variance_floor: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams { variance_floor: 1e-9 }
    }
}

/// `P(x | y=c)` for one feature under a normal with mean `mean` and standard
/// deviation `stddev`.
pub fn gaussian_density(x: f64, mean: f64, stddev: f64) -> f64 {
    let var = stddev * stddev;
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// Per-class Gaussian likelihoods. Index 0 is the negative class, 1 the
/// positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbModel {
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub stddevs: [Vec<f64>; 2],
}

impl GaussianNbModel {
    pub fn n_features(&self) -> usize {
        self.means[0].len()
    }

    /// `log prior_c + sum_i log P(x_i | y=c)` for both classes.
    pub fn log_joint(&self, row: &[f64]) -> [f64; 2] {
        [0, 1].map(|c| {
            let mut lp = self.priors[c].ln();
            for ((&x, &m), &s) in row.iter().zip(&self.means[c]).zip(&self.stddevs[c]) {
                let var = s * s;
                lp += -0.5 * (2.0 * PI * var).ln() - (x - m).powi(2) / (2.0 * var);
            }
            lp
        })
    }

    /// Normalized posterior `[P(neg | x), P(pos | x)]`.
    pub fn posterior(&self, row: &[f64]) -> [f64; 2] {
        let lj = self.log_joint(row);
        let max = lj[0].max(lj[1]);
        let e = lj.map(|v| (v - max).exp());
        let z = e[0] + e[1];
        e.map(|v| v / z)
    }

    pub fn predict_row(&self, row: &[f64]) -> bool {
        let lj = self.log_joint(row);
        lj[1] >= lj[0]
    }
}

pub fn fit_gaussian_nb(train: &FeatureDataset, params: &NbParams) -> Result<GaussianNbModel> {
    require_both_classes(train)?;
    let d = train.n_features();
    let n = train.len() as f64;
    let mut priors = [0.0; 2];
    let mut means = [vec![0.0; d], vec![0.0; d]];
    let mut stddevs = [vec![0.0; d], vec![0.0; d]];
    for c in 0..2 {
        let class = train.with_label(c == 1);
        let nc = class.len() as f64;
        priors[c] = nc / n;
        for j in 0..d {
            let mean = class.features().column(j).sum::<f64>() / nc;
            let var = class.features().column(j).map(|v| (v - mean).powi(2)).sum::<f64>() / nc;
            means[c][j] = mean;
            stddevs[c][j] = (var + params.variance_floor).sqrt();
        }
    }
    Ok(GaussianNbModel { priors, means, stddevs })
}
