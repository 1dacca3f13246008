use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::COVARIANCE_JITTER;
use crate::data::{FeatureDataset, FeatureMatrix, FeatureSchema};
use crate::error::{Error, Result};
use crate::seed::Rng;

/// Gaussian copula: empirical marginals joined by the correlation of the
/// normal scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaModel {
    pub schema: FeatureSchema,
    /// Sorted training values per feature.
    pub marginals: Vec<Vec<f64>>,
    /// Row-major `d x d` correlation of normal scores.
    pub correlation: Vec<f64>,
    /// Row-major lower Cholesky factor of `correlation + jitter * I`.
    cholesky: Vec<f64>,
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// Average 1-based ranks, ties sharing the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Linear interpolation into sorted `values` at probability `u`.
fn quantile(values: &[f64], u: f64) -> f64 {
    let pos = u.clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(values.len() - 1);
    let t = pos - lo as f64;
    values[lo] + t * (values[hi] - values[lo])
}

impl CopulaModel {
    pub(super) fn fit(minority: &FeatureDataset) -> Result<Self> {
        let n = minority.len();
        let d = minority.n_features();
        let normal = std_normal();
        let x = minority.features();
        let mut marginals = Vec::with_capacity(d);
        let mut scores = Vec::with_capacity(d);
        for j in 0..d {
            let column: Vec<f64> = x.column(j).collect();
            scores.push(
                average_ranks(&column)
                    .into_iter()
                    .map(|r| normal.inverse_cdf(r / (n as f64 + 1.0)))
                    .collect::<Vec<f64>>(),
            );
            let mut sorted = column;
            sorted.sort_by(f64::total_cmp);
            marginals.push(sorted);
        }
        let mut correlation = vec![0.0; d * d];
        for a in 0..d {
            correlation[a * d + a] = 1.0;
            for b in 0..a {
                let r = pearson(&scores[a], &scores[b]);
                correlation[a * d + b] = r;
                correlation[b * d + a] = r;
            }
        }
        let mut jittered = DMatrix::from_row_slice(d, d, &correlation);
        for a in 0..d {
            jittered[(a, a)] += COVARIANCE_JITTER;
        }
        let chol = jittered
            .cholesky()
            .ok_or_else(|| Error::Numerical("copula correlation not positive definite".into()))?;
        let l = chol.l();
        let cholesky = (0..d)
            .flat_map(|r| (0..d).map(move |c| (r, c)))
            .map(|(r, c)| l[(r, c)])
            .collect();
        Ok(CopulaModel {
            schema: minority.schema().clone(),
            marginals,
            correlation,
            cholesky,
        })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn correlation_at(&self, a: usize, b: usize) -> f64 {
        self.correlation[a * self.dim() + b]
    }

    pub(super) fn sample(&self, n: usize, rng: &mut Rng) -> Result<FeatureMatrix> {
        let d = self.dim();
        if d == 0 || self.marginals.iter().any(Vec::is_empty) || self.cholesky.len() != d * d {
            return Err(Error::InvalidInput("copula model is not fitted".into()));
        }
        let normal = std_normal();
        let mut out = FeatureMatrix::empty(d);
        let mut eps = vec![0.0; d];
        let mut row = vec![0.0; d];
        for _ in 0..n {
            for e in eps.iter_mut() {
                *e = StandardNormal.sample(rng);
            }
            for j in 0..d {
                let z: f64 = (0..=j).map(|k| self.cholesky[j * d + k] * eps[k]).sum();
                row[j] = quantile(&self.marginals[j], normal.cdf(z)).clamp(-1.0, 1.0);
            }
            out.push_row(&row)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::test_support::minority;
    use crate::generators::{fit_generator, sample_pool, GeneratorKind, GeneratorModel, GeneratorSettings};

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn quantile_interpolates() {
        let v = [0.0, 1.0, 3.0];
        assert_eq!(quantile(&v, 0.0), 0.0);
        assert_eq!(quantile(&v, 0.75), 2.0);
        assert_eq!(quantile(&v, 1.0), 3.0);
    }

    #[test]
    fn identical_columns_are_perfectly_correlated() {
        let base = minority(25, 4);
        let rows: Vec<Vec<f64>> = (0..base.len())
            .map(|i| {
                let mut r = base.row(i).to_vec();
                r[5] = r[2];
                r
            })
            .collect();
        let ds = FeatureDataset::from_rows(FeatureSchema::default(), &rows, vec![true; rows.len()]).unwrap();
        let m = CopulaModel::fit(&ds).unwrap();
        assert!((m.correlation_at(2, 5) - 1.0).abs() < 1e-9);
        for a in 0..11 {
            assert_eq!(m.correlation_at(a, a), 1.0);
            for b in 0..11 {
                assert_eq!(m.correlation_at(a, b), m.correlation_at(b, a));
            }
        }
    }

    #[test]
    fn constant_feature_has_zero_correlation() {
        let base = minority(10, 4);
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let mut r = base.row(i).to_vec();
                r[0] = 0.25;
                r
            })
            .collect();
        let ds = FeatureDataset::from_rows(FeatureSchema::default(), &rows, vec![true; 10]).unwrap();
        let m = CopulaModel::fit(&ds).unwrap();
        assert_eq!(m.correlation_at(0, 3), 0.0);
        let pool = sample_pool(&GeneratorModel::GaussianCopula(m), 20, 1).unwrap();
        assert!(pool.rows().column(0).all(|v| v == 0.25));
    }

    #[test]
    fn marginal_means_are_preserved() {
        let data = minority(60, 8);
        let model = fit_generator(GeneratorKind::GaussianCopula, &data, &GeneratorSettings::default(), 0).unwrap();
        let pool = sample_pool(&model, 2000, 17).unwrap();
        let n = data.len() as f64;
        for j in 0..11 {
            let reference = data.features().column(j).sum::<f64>() / n;
            let sampled = pool.rows().column(j).sum::<f64>() / 2000.0;
            assert!(
                (reference - sampled).abs() < 0.1,
                "feature {j}: {reference} vs {sampled}"
            );
        }
    }
}
