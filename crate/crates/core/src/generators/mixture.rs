use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::COVARIANCE_JITTER;
use crate::data::{FeatureDataset, FeatureMatrix, FeatureSchema};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Row-major `d x d`, jitter already on the diagonal.
    pub covariance: Vec<f64>,
}

/// Full-covariance Gaussian mixture fitted by expectation-maximisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub schema: FeatureSchema,
    pub components: Vec<MixtureComponent>,
    pub iterations: usize,
    pub log_likelihood: f64,
}

struct Factor {
    l: DMatrix<f64>,
    log_det: f64,
}

fn factor(cov: &DMatrix<f64>) -> Result<Factor> {
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("mixture covariance not positive definite".into()))?;
    let l = chol.l();
    let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(Factor { l, log_det })
}

fn log_density(x: &DVector<f64>, mean: &DVector<f64>, f: &Factor) -> f64 {
    let d = x.len() as f64;
    let diff = x - mean;
    let solved =
        f.l.solve_lower_triangular(&diff)
            .expect("cholesky factor has a positive diagonal");
    -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + f.log_det + solved.norm_squared())
}

fn weighted_covariance(xs: &[DVector<f64>], resp: &[f64], mean: &DVector<f64>, total: f64) -> DMatrix<f64> {
    let d = mean.len();
    let mut cov = DMatrix::zeros(d, d);
    for (x, &r) in xs.iter().zip(resp) {
        if r == 0.0 {
            continue;
        }
        let diff = x - mean;
        cov.ger(r / total, &diff, &diff, 1.0);
    }
    for j in 0..d {
        cov[(j, j)] += COVARIANCE_JITTER;
    }
    cov
}

impl MixtureModel {
    pub(super) fn fit(minority: &FeatureDataset, k: usize, max_iterations: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("mixture needs at least one component".into()));
        }
        let n = minority.len();
        let d = minority.n_features();
        let xs: Vec<DVector<f64>> = minority.features().rows().map(DVector::from_column_slice).collect();
        let mut rng = seed::rng(seed);

        let global_mean = xs.iter().fold(DVector::zeros(d), |acc, x| acc + x) / n as f64;
        let global_cov = weighted_covariance(&xs, &vec![1.0; n], &global_mean, n as f64);

        let mut means: Vec<DVector<f64>> = index::sample(&mut rng, n, k)
            .into_iter()
            .map(|i| xs[i].clone())
            .collect();
        let mut covs = vec![global_cov.clone(); k];
        let mut weights = vec![1.0 / k as f64; k];

        let mut resp = vec![vec![0.0; n]; k];
        let mut prev_ll = f64::NEG_INFINITY;
        let mut ll = prev_ll;
        let mut iterations = 0;
        for _ in 0..max_iterations.max(1) {
            iterations += 1;
            // E step
            let factors = covs.iter().map(factor).collect::<Result<Vec<_>>>()?;
            ll = 0.0;
            let mut logp = vec![0.0; k];
            for (i, x) in xs.iter().enumerate() {
                for c in 0..k {
                    logp[c] = weights[c].ln() + log_density(x, &means[c], &factors[c]);
                }
                let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + logp.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                ll += lse;
                for c in 0..k {
                    resp[c][i] = (logp[c] - lse).exp();
                }
            }
            // M step
            for c in 0..k {
                let total: f64 = resp[c].iter().sum();
                if total < 1e-10 {
                    // collapsed component: restart it on a random row
                    means[c] = xs[rng.random_range(0..n)].clone();
                    covs[c] = global_cov.clone();
                    weights[c] = 1.0 / n as f64;
                    continue;
                }
                let mean = xs
                    .iter()
                    .zip(&resp[c])
                    .fold(DVector::zeros(d), |acc, (x, &r)| acc + x * r)
                    / total;
                covs[c] = weighted_covariance(&xs, &resp[c], &mean, total);
                means[c] = mean;
                weights[c] = total / n as f64;
            }
            let wsum: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= wsum);
            if !ll.is_finite() {
                return Err(Error::Numerical("mixture log-likelihood is not finite".into()));
            }
            if (ll - prev_ll).abs() <= 1e-8 * ll.abs().max(1.0) {
                break;
            }
            prev_ll = ll;
        }

        let components = (0..k)
            .map(|c| MixtureComponent {
                weight: weights[c],
                mean: means[c].iter().copied().collect(),
                covariance: covs[c].transpose().iter().copied().collect(),
            })
            .collect();
        Ok(MixtureModel {
            schema: minority.schema().clone(),
            components,
            iterations,
            log_likelihood: ll,
        })
    }

    pub(super) fn sample(&self, n: usize, rng: &mut Rng) -> Result<FeatureMatrix> {
        let d = self.schema.len();
        if self.components.is_empty() {
            return Err(Error::InvalidInput("mixture model is not fitted".into()));
        }
        let factors = self
            .components
            .iter()
            .map(|c| factor(&DMatrix::from_row_slice(d, d, &c.covariance)))
            .collect::<Result<Vec<_>>>()?;
        let mut out = FeatureMatrix::empty(d);
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = self.components.len() - 1;
            for (c, comp) in self.components.iter().enumerate() {
                acc += comp.weight;
                if u < acc {
                    chosen = c;
                    break;
                }
            }
            let eps = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
            let draw = &factors[chosen].l * eps;
            let row: Vec<f64> = (0..d)
                .map(|j| (self.components[chosen].mean[j] + draw[j]).clamp(-1.0, 1.0))
                .collect();
            out.push_row(&row)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::test_support::minority;

    #[test]
    fn single_component_recovers_sample_mean() {
        let data = minority(30, 6);
        let m = MixtureModel::fit(&data, 1, 50, 0).unwrap();
        assert_eq!(m.components.len(), 1);
        assert!((m.components[0].weight - 1.0).abs() < 1e-12);
        for j in 0..11 {
            let mean = data.features().column(j).sum::<f64>() / 30.0;
            assert!((m.components[0].mean[j] - mean).abs() < 1e-9);
        }
    }

    #[test]
    fn weights_sum_to_one_and_covariances_symmetric() {
        let m = MixtureModel::fit(&minority(50, 2), 3, 100, 4).unwrap();
        let total: f64 = m.components.iter().map(|c| c.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for c in &m.components {
            for a in 0..11 {
                for b in 0..11 {
                    assert!((c.covariance[a * 11 + b] - c.covariance[b * 11 + a]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn separated_clusters_are_found() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let centre = if i % 2 == 0 { -0.6 } else { 0.6 };
                (0..11).map(|j| centre + 0.01 * ((i * 7 + j * 3) % 5) as f64).collect()
            })
            .collect();
        let ds = FeatureDataset::from_rows(FeatureSchema::default(), &rows, vec![true; 40]).unwrap();
        let m = MixtureModel::fit(&ds, 2, 100, 1).unwrap();
        let mut centres: Vec<f64> = m.components.iter().map(|c| c.mean[0]).collect();
        centres.sort_by(f64::total_cmp);
        assert!(
            (centres[0] + 0.58).abs() < 0.05 && (centres[1] - 0.62).abs() < 0.05,
            "{centres:?}"
        );
    }
}
