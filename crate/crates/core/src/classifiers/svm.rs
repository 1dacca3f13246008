//! Soft-margin RBF support vector machine trained with a two-coordinate
//! (SMO) dual solver using second-order working-set selection.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::require_both_classes;
use crate::data::{FeatureDataset, FeatureMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    /// Stop once the maximal KKT violating pair differs by less than this.
    pub tolerance: f64,
    /// Cap on pair updates.
    pub max_iterations: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 100.0,
            gamma: 1.0,
            tolerance: 1e-3,
            max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub gamma: f64,
    pub c: f64,
    pub support_vectors: FeatureMatrix,
    /// `alpha_i * y_i` per support vector.
    pub dual_coefficients: Vec<f64>,
    /// Training-row index of each support vector.
    pub support_indices: Vec<usize>,
    pub bias: f64,
    pub iterations: usize,
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

impl SvmModel {
    pub fn n_features(&self) -> usize {
        self.support_vectors.n_cols()
    }

    pub fn decision_function(&self, row: &[f64]) -> f64 {
        self.support_vectors
            .rows()
            .zip(&self.dual_coefficients)
            .map(|(sv, &coef)| coef * rbf(sv, row, self.gamma))
            .sum::<f64>()
            + self.bias
    }

    /// Zero decision value counts as positive.
    pub fn predict_row(&self, row: &[f64]) -> bool {
        self.decision_function(row) >= 0.0
    }
}

const CACHE_BYTES: usize = 256 << 20;
const TAU: f64 = 1e-12;

/// Kernel rows computed on demand, evicted oldest-first.
struct KernelCache<'a> {
    x: &'a FeatureMatrix,
    gamma: f64,
    rows: Vec<Option<Vec<f64>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelCache<'a> {
    fn new(x: &'a FeatureMatrix, gamma: f64) -> Self {
        let n = x.n_rows();
        KernelCache {
            x,
            gamma,
            rows: vec![None; n],
            order: VecDeque::new(),
            capacity: (CACHE_BYTES / (8 * n.max(1))).max(2),
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if self.rows[i].is_none() {
            if self.order.len() >= self.capacity {
                if let Some(old) = self.order.pop_front() {
                    self.rows[old] = None;
                }
            }
            let xi = self.x.row(i);
            self.rows[i] = Some(self.x.rows().map(|xj| rbf(xi, xj, self.gamma)).collect());
            self.order.push_back(i);
        }
        self.rows[i].as_deref().expect("row just cached")
    }
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    iterations: usize,
}

fn solve(x: &FeatureMatrix, y: &[f64], c: f64, gamma: f64, tol: f64, max_iter: usize) -> Result<Solution> {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    // rbf(x, x) = 1
    let diag = 1.0;
    let mut cache = KernelCache::new(x, gamma);
    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    loop {
        // first index: maximal violator in the up set
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && (v > gmax || (i == usize::MAX && v >= gmax)) {
                gmax = v;
                i = t;
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        if i != usize::MAX {
            let ki = cache.row(i).to_vec();
            for t in 0..n {
                if !in_low(alpha[t], y[t]) {
                    continue;
                }
                let v = y[t] * grad[t];
                gmax2 = gmax2.max(v);
                let b = gmax + v;
                if b > 0.0 {
                    let a = diag + diag - 2.0 * ki[t];
                    let a = if a > 0.0 { a } else { TAU };
                    let obj = -(b * b) / a;
                    if obj < best {
                        best = obj;
                        j = t;
                    }
                }
            }
        }
        let violation = gmax + gmax2;
        if i == usize::MAX || j == usize::MAX || violation < tol {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::NotConverged { iterations, violation });
        }
        iterations += 1;

        let kij = cache.row(i)[j];
        let quad = {
            let q = 2.0 * diag - 2.0 * kij;
            if q > 0.0 {
                q
            } else {
                TAU
            }
        };
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let di = (alpha[i] - old_i) * y[i];
        let dj = (alpha[j] - old_j) * y[j];
        let ki = cache.row(i).to_vec();
        let kj = cache.row(j);
        for t in 0..n {
            grad[t] += y[t] * (ki[t] * di + kj[t] * dj);
        }
    }

    // bias from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg)
            } else {
                lb = lb.max(yg)
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg)
            } else {
                lb = lb.max(yg)
            }
        } else {
            sum += yg;
            n_free += 1;
        }
    }
    let rho = if n_free > 0 {
        sum / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    Ok(Solution { alpha, rho, iterations })
}

pub fn fit_svm(train: &FeatureDataset, params: &SvmParams, _seed: u64) -> Result<SvmModel> {
    require_both_classes(train)?;
    if !(params.c > 0.0 && params.gamma > 0.0 && params.tolerance > 0.0) {
        return Err(Error::InvalidInput(
            "svm C, gamma and tolerance must be positive".into(),
        ));
    }
    let y: Vec<f64> = train.labels().iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let sol = solve(
        train.features(),
        &y,
        params.c,
        params.gamma,
        params.tolerance,
        params.max_iterations,
    )?;
    let support_indices: Vec<usize> = (0..y.len()).filter(|&t| sol.alpha[t] > 0.0).collect();
    let mut support_vectors = FeatureMatrix::empty(train.n_features());
    for &t in &support_indices {
        support_vectors.push_row(train.row(t))?;
    }
    Ok(SvmModel {
        gamma: params.gamma,
        c: params.c,
        support_vectors,
        dual_coefficients: support_indices.iter().map(|&t| sol.alpha[t] * y[t]).collect(),
        support_indices,
        bias: -sol.rho,
        iterations: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::test_support::{blobs, dataset};
    use rand::Rng;

    fn all_correct(m: &SvmModel, ds: &FeatureDataset) -> bool {
        ds.features()
            .rows()
            .zip(ds.labels())
            .all(|(r, &l)| m.predict_row(r) == l)
    }

    #[test]
    fn two_points_both_support() {
        let ds = dataset(&[vec![0.5, 0.5], vec![-0.5, -0.5]], &[true, false]);
        let m = fit_svm(&ds, &SvmParams::default(), 0).unwrap();
        assert_eq!(m.support_indices, vec![0, 1]);
        assert!(all_correct(&m, &ds));
        // symmetric problem: boundary passes through the midpoint
        assert!(m.decision_function(&[0.0, 0.0]).abs() < 1e-9);
    }

    #[test]
    fn xor_is_separated() {
        let ds = dataset(
            &[vec![0.5, 0.5], vec![-0.5, -0.5], vec![0.5, -0.5], vec![-0.5, 0.5]],
            &[true, true, false, false],
        );
        let m = fit_svm(&ds, &SvmParams::default(), 0).unwrap();
        assert!(all_correct(&m, &ds));
    }

    #[test]
    fn duplicated_rows_keep_predictions() {
        let ds = blobs(30, 3, 1.0, 4);
        let idx: Vec<usize> = (0..ds.len()).chain(0..ds.len()).collect();
        let doubled = ds.subset(&idx);
        let p = SvmParams::default();
        let a = fit_svm(&ds, &p, 0).unwrap();
        let b = fit_svm(&doubled, &p, 0).unwrap();
        for gx in -5..=5 {
            for gy in -5..=5 {
                let probe = [gx as f64 / 5.0, gy as f64 / 5.0, 0.1];
                assert_eq!(a.predict_row(&probe), b.predict_row(&probe), "{probe:?}");
            }
        }
    }

    #[test]
    fn single_class_rejected() {
        let ds = dataset(&[vec![0.1], vec![0.3]], &[false, false]);
        assert!(fit_svm(&ds, &SvmParams::default(), 0).is_err());
    }

    #[test]
    fn iteration_cap_reports_violation() {
        let ds = blobs(60, 4, 0.1, 1);
        let p = SvmParams {
            max_iterations: 1,
            ..Default::default()
        };
        match fit_svm(&ds, &p, 0) {
            Err(Error::NotConverged { iterations, violation }) => {
                assert_eq!(iterations, 1);
                assert!(violation >= 1e-3);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    /// Recomputes every decision value from the stored model and checks the
    /// complementary-slackness conditions per training row.
    fn kkt_residual(m: &SvmModel, ds: &FeatureDataset) -> (f64, f64) {
        let mut alpha = vec![0.0; ds.len()];
        for (&t, &coef) in m.support_indices.iter().zip(&m.dual_coefficients) {
            alpha[t] = coef.abs();
        }
        let (mut worst, mut worst_free) = (0.0f64, 0.0f64);
        for (t, (row, &label)) in ds.features().rows().zip(ds.labels()).enumerate() {
            let y = if label { 1.0 } else { -1.0 };
            let margin = y * m.decision_function(row);
            let v = if alpha[t] <= 0.0 {
                (1.0 - margin).max(0.0)
            } else if alpha[t] >= m.c {
                (margin - 1.0).max(0.0)
            } else {
                let f = m.decision_function(row).abs();
                worst_free = worst_free.max((f - 1.0).abs());
                (margin - 1.0).abs()
            };
            worst = worst.max(v);
            assert!((0.0..=m.c).contains(&alpha[t]));
        }
        (worst, worst_free)
    }

    #[test]
    fn kkt_conditions_hold_on_random_separable_problems() {
        let mut rng = crate::seed::rng(17);
        for case in 0..20 {
            let n = rng.random_range(10..40);
            let ds = blobs(n, 11, rng.random_range(0.4..1.2), case);
            let m = fit_svm(&ds, &SvmParams::default(), 0).unwrap();
            let (worst, worst_free) = kkt_residual(&m, &ds);
            assert!(worst <= 1e-3, "case {case}: {worst}");
            assert!(worst_free <= 1e-2, "case {case}: {worst_free}");
        }
    }
}
