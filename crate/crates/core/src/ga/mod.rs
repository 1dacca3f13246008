//! Genetic search over the three-pool mixing simplex.
//!
//! A 12-bit genotype decodes to a [`MixRatio`]; each candidate is scored by
//! balancing the real training data with synthetic positives in that ratio,
//! training a classifier and taking its G-mean on real validation rows.

mod assemble;
mod fitness;
mod genotype;
mod search;

pub use assemble::{assemble_balanced_set, pool_counts, Assembly, AssemblySummary};
pub use fitness::{Fitness, FitnessContext, FitnessStats, TargetRatioFitness, ValidationProtocol};
pub use genotype::{decode_genotype, Genotype, MixRatio, GENOTYPE_BITS, GROUP_BITS, N_POOLS};
pub use search::{
    crossover, mutate, next_generation, roulette_select, run_ga, run_ga_with_progress, GaConfig, GaResult,
    GenerationStats, Offspring,
};
