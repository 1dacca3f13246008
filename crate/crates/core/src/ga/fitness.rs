use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assemble::assemble_balanced_set;
use super::genotype::{Genotype, MixRatio, N_POOLS};
use crate::classifiers::Learner;
use crate::data::{stratified_split, FeatureDataset};
use crate::error::{Error, Result};
use crate::generators::SyntheticPool;
use crate::metrics::{confusion_matrix, g_mean};
use crate::seed;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitnessStats {
    /// Fitness computations actually performed (classifier trainings for a
    /// [`FitnessContext`]).
    pub evaluations: usize,
    pub cache_hits: usize,
    /// One note per failed evaluation, sorted.
    pub failures: Vec<String>,
}

/// Scores genotypes; higher is better, values in `[0, 1]`.
pub trait Fitness: Sync {
    fn evaluate(&self, g: &Genotype) -> f64;

    /// Must equal mapping [`evaluate`](Self::evaluate) over `pop` in order.
    fn evaluate_population(&self, pop: &[Genotype]) -> Vec<f64> {
        pop.par_iter().map(|g| self.evaluate(g)).collect()
    }

    fn stats(&self) -> FitnessStats {
        FitnessStats::default()
    }
}

/// Classifier-free landscape `1 - max_i |r_i - target_i|`.
#[derive(Debug)]
pub struct TargetRatioFitness {
    pub target: [f64; N_POOLS],
    calls: AtomicUsize,
}

impl TargetRatioFitness {
    pub fn new(target: [f64; N_POOLS]) -> Self {
        TargetRatioFitness {
            target,
            calls: AtomicUsize::new(0),
        }
    }
}

impl Fitness for TargetRatioFitness {
    fn evaluate(&self, g: &Genotype) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        1.0 - g.decode().linf_distance(&self.target)
    }

    fn stats(&self) -> FitnessStats {
        FitnessStats {
            evaluations: self.calls.load(Ordering::Relaxed),
            ..Default::default()
        }
    }
}

/// Which rows the fitness G-mean is measured on.
#[derive(Clone)]
pub enum ValidationProtocol {
    /// Stratified split of the real training data; the held-out share is
    /// scored, the rest is the mixing base.
    InnerSplit { fraction: f64 },
    /// Score on the supplied rows; the full training data is the mixing
    /// base.
    Provided(FeatureDataset),
}

/// Trains the configured learner on a balanced mix and scores it.
pub struct FitnessContext {
    mixing_base: FeatureDataset,
    validation: FeatureDataset,
    pools: Vec<SyntheticPool>,
    learner: Arc<dyn Learner>,
    seed: u64,
    cache: Mutex<HashMap<[u8; N_POOLS], f64>>,
    evaluations: AtomicUsize,
    cache_hits: AtomicUsize,
    failures: Mutex<Vec<String>>,
}

impl FitnessContext {
    pub fn new(
        real_train: &FeatureDataset,
        pools: Vec<SyntheticPool>,
        learner: Arc<dyn Learner>,
        protocol: ValidationProtocol,
        seed: u64,
    ) -> Result<Self> {
        if pools.len() != N_POOLS {
            return Err(Error::InvalidInput(format!(
                "expected {N_POOLS} pools, got {}",
                pools.len()
            )));
        }
        let (mixing_base, validation) = match protocol {
            ValidationProtocol::InnerSplit { fraction } => {
                stratified_split(real_train, fraction, seed::derive(seed, &[seed::tag("inner-split")]))?
            }
            ValidationProtocol::Provided(v) => (real_train.clone(), v),
        };
        if validation.origins().iter().any(|o| o.is_synthetic()) {
            return Err(Error::Leakage("fitness validation set contains synthetic rows".into()));
        }
        if !validation.has_both_classes() {
            return Err(Error::InvalidInput("fitness validation set needs both classes".into()));
        }
        let base_ids = mixing_base.real_ids();
        if validation
            .origins()
            .iter()
            .filter_map(|o| o.real_id())
            .any(|id| base_ids.contains(&id))
        {
            return Err(Error::Leakage("fitness validation rows overlap the mixing base".into()));
        }
        Ok(FitnessContext {
            mixing_base,
            validation,
            pools,
            learner,
            seed,
            cache: Mutex::new(HashMap::new()),
            evaluations: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
            failures: Mutex::new(Vec::new()),
        })
    }

    pub fn mixing_base(&self) -> &FeatureDataset {
        &self.mixing_base
    }

    pub fn validation(&self) -> &FeatureDataset {
        &self.validation
    }

    pub fn pools(&self) -> &[SyntheticPool] {
        &self.pools
    }

    /// Every ratio is scored with the same seed: candidates differ only in
    /// their mix, not in sampling luck, and a cached value is exactly what
    /// recomputation would give.
    fn evaluation_seed(&self) -> u64 {
        seed::derive(self.seed, &[seed::tag("fitness")])
    }

    fn compute(&self, key: [u8; N_POOLS]) -> f64 {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let ratio = MixRatio::from_weights(key.map(f64::from)).expect("key weights are positive");
        match self.score(&ratio, self.evaluation_seed()) {
            Ok(v) => v,
            Err(e) => {
                self.failures
                    .lock()
                    .expect("failure log poisoned")
                    .push(format!("{}:{}:{}: {e}", key[0], key[1], key[2]));
                0.0
            }
        }
    }

    /// G-mean on the validation rows of the learner trained on the mixing
    /// base balanced with `ratio`.
    pub fn score(&self, ratio: &MixRatio, seed: u64) -> Result<f64> {
        let assembly = assemble_balanced_set(
            &self.mixing_base,
            &self.pools,
            ratio,
            seed::derive(seed, &[seed::tag("assemble")]),
        )?;
        let model = self
            .learner
            .fit_predictor(&assembly.dataset, seed::derive(seed, &[seed::tag("fit")]))?;
        let predicted = model.predict(self.validation.features())?;
        g_mean(&confusion_matrix(self.validation.labels(), &predicted)?)
    }

    fn cached(&self, key: &[u8; N_POOLS]) -> Option<f64> {
        self.cache.lock().expect("fitness cache poisoned").get(key).copied()
    }
}

impl Fitness for FitnessContext {
    fn evaluate(&self, g: &Genotype) -> f64 {
        let key = g.ratio_key();
        if let Some(v) = self.cached(&key) {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
            return v;
        }
        let v = self.compute(key);
        self.cache.lock().expect("fitness cache poisoned").insert(key, v);
        v
    }

    /// Evaluates each uncached ratio once, in parallel, then reads every
    /// individual from the cache.
    fn evaluate_population(&self, pop: &[Genotype]) -> Vec<f64> {
        let mut pending = Vec::new();
        for g in pop {
            let key = g.ratio_key();
            if self.cached(&key).is_none() && !pending.contains(&key) {
                pending.push(key);
            }
        }
        let fresh: Vec<([u8; N_POOLS], f64)> = pending.par_iter().map(|&k| (k, self.compute(k))).collect();
        let mut cache = self.cache.lock().expect("fitness cache poisoned");
        cache.extend(fresh);
        self.cache_hits.fetch_add(pop.len() - pending.len(), Ordering::Relaxed);
        pop.iter().map(|g| cache[&g.ratio_key()]).collect()
    }

    fn stats(&self) -> FitnessStats {
        let mut failures = self.failures.lock().expect("failure log poisoned").clone();
        failures.sort();
        FitnessStats {
            evaluations: self.evaluations.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
            failures,
        }
    }
}
