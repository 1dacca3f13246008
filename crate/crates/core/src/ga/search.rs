use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::fitness::{Fitness, FitnessStats};
use super::genotype::{Genotype, MixRatio, GENOTYPE_BITS};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub iterations: usize,
    pub crossover_probability: f64,
    /// Per bit.
    pub mutation_probability: f64,
    pub elite_count: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 150,
            iterations: 50,
            crossover_probability: 0.8,
            mutation_probability: 0.01,
            elite_count: 2,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let m = self.population_size;
        if m < 2 || !m.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "population size must be even and at least 2, got {m}"
            )));
        }
        for (name, p) in [
            ("crossover probability", self.crossover_probability),
            ("mutation probability", self.mutation_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.elite_count >= m {
            return Err(Error::Config(format!(
                "elite count {} must be below the population size {m}",
                self.elite_count
            )));
        }
        Ok(())
    }
}

/// Fitness-proportional pick; uniform when every fitness is zero.
pub fn roulette_select(fitness: &[f64], rng: &mut Rng) -> usize {
    let total: f64 = fitness.iter().map(|f| f.max(0.0)).sum();
    if total <= 0.0 {
        return rng.random_range(0..fitness.len());
    }
    let mut u = rng.random::<f64>() * total;
    for (i, f) in fitness.iter().enumerate() {
        let f = f.max(0.0);
        if u < f {
            return i;
        }
        u -= f;
    }
    // rounding left u at the top edge
    fitness.iter().rposition(|&f| f > 0.0).expect("positive total")
}

/// Swaps every bit from `point` on.
pub fn crossover(a: &Genotype, b: &Genotype, point: usize) -> (Genotype, Genotype) {
    let (mut c, mut d) = (*a, *b);
    c.bits_mut()[point..].copy_from_slice(&b.bits()[point..]);
    d.bits_mut()[point..].copy_from_slice(&a.bits()[point..]);
    (c, d)
}

pub fn mutate(g: &mut Genotype, p: f64, rng: &mut Rng) {
    for bit in g.bits_mut().iter_mut() {
        if rng.random_bool(p) {
            *bit = !*bit;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Offspring {
    pub population: Vec<Genotype>,
    /// Selection fell back to uniform because every fitness was zero.
    pub uniform_selection: bool,
}

/// Elites unchanged (in population order), the rest bred by roulette
/// selection, per-pair single-point crossover and per-bit mutation.
pub fn next_generation(pop: &[(Genotype, f64)], cfg: &GaConfig, rng: &mut Rng) -> Offspring {
    let m = pop.len();
    let fitness: Vec<f64> = pop.iter().map(|p| p.1).collect();
    let mut ranked: Vec<usize> = (0..m).collect();
    ranked.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
    let mut elite: Vec<usize> = ranked.into_iter().take(cfg.elite_count.min(m)).collect();
    elite.sort_unstable();
    let mut population: Vec<Genotype> = elite.iter().map(|&i| pop[i].0).collect();
    let uniform_selection = population.len() < m && fitness.iter().all(|&f| f <= 0.0);
    while population.len() < m {
        let a = pop[roulette_select(&fitness, rng)].0;
        let b = pop[roulette_select(&fitness, rng)].0;
        let (mut c, mut d) = if rng.random_bool(cfg.crossover_probability) {
            crossover(&a, &b, rng.random_range(1..GENOTYPE_BITS))
        } else {
            (a, b)
        };
        mutate(&mut c, cfg.mutation_probability, rng);
        mutate(&mut d, cfg.mutation_probability, rng);
        population.push(c);
        if population.len() < m {
            population.push(d);
        }
    }
    Offspring {
        population,
        uniform_selection,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    /// Best fitness in this generation.
    pub best: f64,
    pub mean: f64,
    /// Best fitness seen so far, including the initial population.
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub best_genotype: Genotype,
    pub best_ratio: MixRatio,
    pub best_fitness: f64,
    /// Fitness of the random initial population's best individual.
    pub initial_best: f64,
    /// One entry per bred generation.
    pub history: Vec<GenerationStats>,
    /// Fitness values requested (population size times generations + 1).
    pub fitness_calls: usize,
    pub evaluations: usize,
    pub cache_hits: usize,
    pub uniform_selection_generations: Vec<usize>,
    pub failures: Vec<String>,
}

impl GaResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn run_ga(cfg: &GaConfig, fitness: &dyn Fitness) -> Result<GaResult> {
    run_ga_with_progress(cfg, fitness, |_| {})
}

/// Like [`run_ga`], calling `progress` after each generation.
pub fn run_ga_with_progress(
    cfg: &GaConfig,
    fitness: &dyn Fitness,
    mut progress: impl FnMut(&GenerationStats),
) -> Result<GaResult> {
    cfg.validate()?;
    let before = fitness.stats();
    let mut rng = seed::rng(seed::derive(cfg.seed, &[seed::tag("ga")]));
    let mut population: Vec<Genotype> = (0..cfg.population_size)
        .map(|_| Genotype::new(std::array::from_fn(|_| rng.random_bool(0.5))))
        .collect();
    let mut scores = fitness.evaluate_population(&population);
    let mut fitness_calls = population.len();
    let first = argmax(&scores);
    let (mut best_genotype, mut best_fitness) = (population[first], scores[first]);
    let initial_best = best_fitness;
    let mut history = Vec::with_capacity(cfg.iterations);
    let mut uniform_selection_generations = Vec::new();
    for generation in 1..=cfg.iterations {
        let scored: Vec<(Genotype, f64)> = population.iter().copied().zip(scores.iter().copied()).collect();
        let next = next_generation(&scored, cfg, &mut rng);
        if next.uniform_selection {
            uniform_selection_generations.push(generation);
        }
        population = next.population;
        scores = fitness.evaluate_population(&population);
        fitness_calls += population.len();
        let i = argmax(&scores);
        if scores[i] > best_fitness {
            best_fitness = scores[i];
            best_genotype = population[i];
        }
        let stats = GenerationStats {
            generation,
            best: scores[i],
            mean: scores.iter().sum::<f64>() / scores.len() as f64,
            best_so_far: best_fitness,
        };
        progress(&stats);
        history.push(stats);
    }
    let after = fitness.stats();
    let FitnessStats { failures, .. } = after.clone();
    Ok(GaResult {
        best_genotype,
        best_ratio: best_genotype.decode(),
        best_fitness,
        initial_best,
        history,
        fitness_calls,
        evaluations: after.evaluations - before.evaluations,
        cache_hits: after.cache_hits - before.cache_hits,
        uniform_selection_generations,
        failures,
    })
}

/// First index of the maximum.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
