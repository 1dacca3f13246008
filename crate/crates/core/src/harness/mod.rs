//! End-to-end experiments: imbalanced baseline, single-pool balancing and
//! GA-optimized mixing for each configured classifier, scored on a held-out
//! test split.

mod config;
mod experiment;
mod report;

pub use config::{DataSource, ExperimentConfig, PoolSpec};
pub use experiment::{
    build_pools, fit_variant, fitness_context, load_base, prepare, repetition_seed, run_experiment,
    run_experiment_with_progress, score_model, search_data, search_mixture, variant_training_set, DataSummary,
    PreparedData, SearchData, TestGuard,
};
pub use report::{
    render_report, ClassifierRun, ExperimentReport, LeakageAudit, RatioRow, ReportBody, ReportFormat, RunResult,
    RunStatus, StageTiming, TableCell, TableRow, Timings, Variant, VariantResult,
};
