//! Synthetic minority-class generators and the pools they fill.
//!
//! Three statistical samplers stand in for table GANs: a Gaussian copula over
//! empirical marginals, a full-covariance Gaussian mixture fitted by EM, and
//! a SMOTE-style neighbour interpolator. Pools produced elsewhere (for
//! example by a GAN) enter through [`load_external_pool`].

mod copula;
mod interpolator;
mod mixture;
mod pool;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use copula::CopulaModel;
pub use interpolator::InterpolatorModel;
pub use mixture::{MixtureComponent, MixtureModel};
pub use pool::{load_external_pool, validate_pool, write_pool_csv, FeatureDelta, PoolQualityReport, SyntheticPool};

use crate::data::{FeatureDataset, FeatureSchema};
use crate::error::{Error, Result};

/// Added to covariance diagonals before factorisation.
pub(crate) const COVARIANCE_JITTER: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    GaussianCopula,
    GaussianMixture,
    Interpolator,
    External,
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorKind::GaussianCopula => "gaussian_copula",
            GeneratorKind::GaussianMixture => "gaussian_mixture",
            GeneratorKind::Interpolator => "interpolator",
            GeneratorKind::External => "external",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSettings {
    pub mixture_components: usize,
    pub mixture_max_iterations: usize,
    pub interpolator_neighbors: usize,
}

impl Default for GeneratorSettings {
    fn default() -> Self {
        GeneratorSettings {
            mixture_components: 3,
            mixture_max_iterations: 100,
            interpolator_neighbors: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorModel {
    GaussianCopula(CopulaModel),
    GaussianMixture(MixtureModel),
    Interpolator(InterpolatorModel),
}

impl GeneratorModel {
    pub fn kind(&self) -> GeneratorKind {
        match self {
            GeneratorModel::GaussianCopula(_) => GeneratorKind::GaussianCopula,
            GeneratorModel::GaussianMixture(_) => GeneratorKind::GaussianMixture,
            GeneratorModel::Interpolator(_) => GeneratorKind::Interpolator,
        }
    }

    pub fn schema(&self) -> &FeatureSchema {
        match self {
            GeneratorModel::GaussianCopula(m) => &m.schema,
            GeneratorModel::GaussianMixture(m) => &m.schema,
            GeneratorModel::Interpolator(m) => &m.schema,
        }
    }
}

/// Fits a generator on minority (positive) rows only.
pub fn fit_generator(
    kind: GeneratorKind,
    minority: &FeatureDataset,
    settings: &GeneratorSettings,
    seed: u64,
) -> Result<GeneratorModel> {
    if minority.labels().iter().any(|&l| !l) {
        return Err(Error::InvalidInput(
            "generators are fitted on positive rows only; negative rows present".into(),
        ));
    }
    let required = match kind {
        GeneratorKind::GaussianCopula => 3,
        GeneratorKind::GaussianMixture => settings.mixture_components + 1,
        GeneratorKind::Interpolator => settings.interpolator_neighbors + 1,
        GeneratorKind::External => {
            return Err(Error::InvalidInput("external pools are loaded, not fitted".into()));
        }
    };
    if minority.len() < required {
        return Err(Error::TooFewRows {
            required,
            found: minority.len(),
        });
    }
    Ok(match kind {
        GeneratorKind::GaussianCopula => GeneratorModel::GaussianCopula(CopulaModel::fit(minority)?),
        GeneratorKind::GaussianMixture => GeneratorModel::GaussianMixture(MixtureModel::fit(
            minority,
            settings.mixture_components,
            settings.mixture_max_iterations,
            seed,
        )?),
        GeneratorKind::Interpolator => {
            GeneratorModel::Interpolator(InterpolatorModel::fit(minority, settings.interpolator_neighbors)?)
        }
        GeneratorKind::External => unreachable!(),
    })
}

/// Draws exactly `n` rows, clamped into `[-1, 1]`.
pub fn sample_pool(model: &GeneratorModel, n: usize, seed: u64) -> Result<SyntheticPool> {
    if n == 0 {
        return Err(Error::InvalidInput("pool size must be at least 1".into()));
    }
    let mut rng = crate::seed::rng(seed);
    let rows = match model {
        GeneratorModel::GaussianCopula(m) => m.sample(n, &mut rng)?,
        GeneratorModel::GaussianMixture(m) => m.sample(n, &mut rng)?,
        GeneratorModel::Interpolator(m) => m.sample(n, &mut rng)?.0,
    };
    SyntheticPool::new(
        model.schema().clone(),
        rows,
        model.kind(),
        format!("{} sampler, n={n}, seed={seed}", model.kind()),
    )
}

/// Mean and population standard deviation per column.
pub(crate) fn column_moments(x: &crate::data::FeatureMatrix) -> Vec<(f64, f64)> {
    let n = x.n_rows() as f64;
    (0..x.n_cols())
        .map(|j| {
            let mean = x.column(j).sum::<f64>() / n;
            let var = x.column(j).map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod test_support {
    use crate::data::{FeatureDataset, FeatureSchema};
    use rand::Rng;

    /// `n` positive rows in `[-0.9, 0.9]^11` with some correlation.
    pub fn minority(n: usize, seed: u64) -> FeatureDataset {
        let mut rng = crate::seed::rng(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let base: f64 = rng.random_range(-0.5..0.5);
                (0..11)
                    .map(|j| (base + 0.4 * rng.random_range(-1.0..1.0) * (j as f64 / 11.0)).clamp(-0.9, 0.9))
                    .collect()
            })
            .collect();
        FeatureDataset::from_rows(FeatureSchema::default(), &rows, vec![true; n]).unwrap()
    }
}
