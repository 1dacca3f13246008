use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureDataset, FeatureMatrix, FeatureSchema};
use crate::error::{Error, Result};
use crate::seed::Rng;

/// SMOTE-style sampler: each synthetic row lies on the segment between a
/// stored row and one of its `k` nearest stored neighbours.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InterpolatorModel {
    pub schema: FeatureSchema,
    pub rows: Vec<Vec<f64>>,
    pub k: usize,
    /// `neighbors[i]` are the indices of the `k` rows nearest to row `i`.
    pub neighbors: Vec<Vec<usize>>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

impl InterpolatorModel {
    pub(super) fn fit(minority: &FeatureDataset, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("interpolator needs at least one neighbour".into()));
        }
        let rows: Vec<Vec<f64>> = minority.features().rows().map(<[f64]>::to_vec).collect();
        let neighbors = (0..rows.len())
            .map(|i| {
                let mut others: Vec<(f64, usize)> = (0..rows.len())
                    .filter(|&o| o != i)
                    .map(|o| (sq_dist(&rows[i], &rows[o]), o))
                    .collect();
                others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                others.into_iter().take(k).map(|(_, o)| o).collect()
            })
            .collect();
        Ok(InterpolatorModel {
            schema: minority.schema().clone(),
            rows,
            k,
            neighbors,
        })
    }

    /// Samples `n` rows, also returning the `(base, neighbour)` indices each
    /// row was interpolated between.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<(FeatureMatrix, Vec<(usize, usize)>)> {
        if self.rows.len() < 2 || self.neighbors.len() != self.rows.len() {
            return Err(Error::InvalidInput("interpolator model is not fitted".into()));
        }
        let d = self.schema.len();
        let mut out = FeatureMatrix::empty(d);
        let mut parents = Vec::with_capacity(n);
        let mut row = vec![0.0; d];
        for _ in 0..n {
            let a = rng.random_range(0..self.rows.len());
            let nbrs = &self.neighbors[a];
            let b = nbrs[rng.random_range(0..nbrs.len())];
            let gap: f64 = rng.random();
            for (j, v) in row.iter_mut().enumerate() {
                let (x, y) = (self.rows[a][j], self.rows[b][j]);
                *v = (x + gap * (y - x)).clamp(-1.0, 1.0);
            }
            out.push_row(&row)?;
            parents.push((a, b));
        }
        Ok((out, parents))
    }
}
