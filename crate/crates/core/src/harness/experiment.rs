use std::collections::HashSet;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig, PoolSpec};
use super::report::{
    ClassifierRun, ExperimentReport, LeakageAudit, ReportBody, RunResult, RunStatus, StageTiming, Timings, Variant,
    VariantResult,
};
use crate::classifiers::{ClassifierModel, ClassifierSpec, Predictor};
use crate::data::{
    apply_normalizer, fit_normalizer, generate_fixture, load_smart_csv_filtered, stratified_split, subsample_to_ratio,
    FeatureDataset, LoadReport, NormalizerParams,
};
use crate::error::{Error, Result};
use crate::ga::{
    assemble_balanced_set, run_ga_with_progress, AssemblySummary, FitnessContext, GaResult, GenerationStats, MixRatio,
    ValidationProtocol,
};
use crate::generators::{
    fit_generator, load_external_pool, sample_pool, validate_pool, PoolQualityReport, SyntheticPool,
};
use crate::metrics::MetricBundle;
use crate::seed::{derive, tag};

/// Seed of repetition `r` under master seed `master`.
pub fn repetition_seed(master: u64, r: usize) -> u64 {
    derive(master, &[tag("repetition"), r as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub rows_loaded: usize,
    pub rows_after_subsampling: usize,
    pub train_positive: usize,
    pub train_negative: usize,
    pub test_positive: usize,
    pub test_negative: usize,
    /// Synthetic positives needed to balance the training split.
    pub need: usize,
    pub load_report: Option<LoadReport>,
}

/// Normalized train/test split of the base data.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub train: FeatureDataset,
    pub test: FeatureDataset,
    pub normalizer: NormalizerParams,
    pub summary: DataSummary,
}

pub fn load_base(cfg: &ExperimentConfig) -> Result<(FeatureDataset, Option<LoadReport>)> {
    match &cfg.data {
        DataSource::Fixture { spec } => {
            let ds = generate_fixture(spec, derive(cfg.seed, &[tag("fixture")]))?;
            if ds.schema() != &cfg.features {
                return Err(Error::Config(
                    "the fixture provides the default eleven features only".into(),
                ));
            }
            Ok((ds, None))
        }
        DataSource::Csv { path, model } => {
            let (ds, report) = load_smart_csv_filtered(path, &cfg.features, model.as_deref())?;
            Ok((ds, Some(report)))
        }
    }
}

/// Subsample to the configured imbalance, split, and normalize both sides
/// with statistics of the training side only.
pub fn prepare(cfg: &ExperimentConfig, run_seed: u64) -> Result<PreparedData> {
    let (base, load_report) = load_base(cfg)?;
    let sub = subsample_to_ratio(&base, cfg.imbalance_ratio, derive(run_seed, &[tag("subsample")]))?;
    let (train_raw, test_raw) = stratified_split(&sub, cfg.test_fraction, derive(run_seed, &[tag("split")]))?;
    let normalizer = fit_normalizer(&train_raw)?;
    let train = apply_normalizer(&normalizer, &train_raw)?;
    let test = apply_normalizer(&normalizer, &test_raw)?;
    let summary = DataSummary {
        rows_loaded: base.len(),
        rows_after_subsampling: sub.len(),
        train_positive: train.n_positive(),
        train_negative: train.n_negative(),
        test_positive: test.n_positive(),
        test_negative: test.n_negative(),
        need: train.n_negative().saturating_sub(train.n_positive()),
        load_report,
    };
    Ok(PreparedData {
        train,
        test,
        normalizer,
        summary,
    })
}

/// Fits the configured generators on the training positives (or loads
/// external pools) and checks each pool against those positives.
pub fn build_pools(
    cfg: &ExperimentConfig,
    train: &FeatureDataset,
    run_seed: u64,
) -> Result<(Vec<SyntheticPool>, Vec<PoolQualityReport>)> {
    let minority = train.with_label(true);
    let need = train.n_negative().saturating_sub(train.n_positive());
    let size = cfg.pool_size.unwrap_or(need);
    let mut pools = Vec::with_capacity(cfg.pools.len());
    let mut quality = Vec::with_capacity(cfg.pools.len());
    for (p, spec) in cfg.pools.iter().enumerate() {
        let pool = match spec {
            PoolSpec::External { path } => load_external_pool(path, &cfg.features)?,
            _ => {
                let model = fit_generator(
                    spec.kind(),
                    &minority,
                    &cfg.generator_settings,
                    derive(run_seed, &[tag("generator"), p as u64]),
                )?;
                sample_pool(&model, size, derive(run_seed, &[tag("pool"), p as u64]))?
            }
        };
        quality.push(validate_pool(&pool, &minority)?);
        pools.push(pool);
    }
    Ok((pools, quality))
}

/// Rows and pools a GA search works with.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchData {
    /// Real rows that get balanced with synthetic positives.
    pub mixing_base: FeatureDataset,
    /// Real rows the fitness G-mean is measured on.
    pub validation: FeatureDataset,
    pub pools: Vec<SyntheticPool>,
}

/// By default the training split is divided again: generators are refitted
/// on the positives of the mixing part only, so the validation positives
/// never shape a synthetic row. In paper-faithful mode the whole training
/// split is mixed with the main pools and scored on `faithful_test`.
pub fn search_data(
    cfg: &ExperimentConfig,
    train: &FeatureDataset,
    pools: &[SyntheticPool],
    faithful_test: Option<&FeatureDataset>,
    run_seed: u64,
) -> Result<SearchData> {
    if let Some(test) = faithful_test {
        return Ok(SearchData {
            mixing_base: train.clone(),
            validation: test.clone(),
            pools: pools.to_vec(),
        });
    }
    let (mixing_base, validation) = stratified_split(
        train,
        cfg.inner_validation_fraction,
        derive(run_seed, &[tag("inner-split")]),
    )?;
    let (search_pools, _) = build_pools(cfg, &mixing_base, derive(run_seed, &[tag("search-pools")]))?;
    Ok(SearchData {
        mixing_base,
        validation,
        pools: search_pools,
    })
}

pub fn fitness_context(
    spec: &ClassifierSpec,
    classifier_index: usize,
    data: &SearchData,
    run_seed: u64,
) -> Result<FitnessContext> {
    FitnessContext::new(
        &data.mixing_base,
        data.pools.clone(),
        Arc::new(spec.clone()),
        ValidationProtocol::Provided(data.validation.clone()),
        derive(run_seed, &[tag("fitness"), classifier_index as u64]),
    )
}

pub fn search_mixture(
    cfg: &ExperimentConfig,
    classifier_index: usize,
    ctx: &FitnessContext,
    run_seed: u64,
    progress: impl FnMut(&GenerationStats),
) -> Result<GaResult> {
    let mut ga = cfg.ga.clone();
    ga.seed = derive(run_seed, &[tag("ga"), classifier_index as u64]);
    run_ga_with_progress(&ga, ctx, progress)
}

/// The training set of one variant: the imbalanced split itself or the split
/// balanced with synthetic positives.
pub fn variant_training_set(
    variant: Variant,
    train: &FeatureDataset,
    pools: &[SyntheticPool],
    ga_ratio: Option<&MixRatio>,
    run_seed: u64,
) -> Result<(FeatureDataset, Option<MixRatio>, Option<AssemblySummary>)> {
    let ratio = match variant {
        Variant::Imbalanced => return Ok((train.clone(), None, None)),
        Variant::GaOptimized => *ga_ratio.ok_or_else(|| Error::InvalidInput("GA variant needs a ratio".into()))?,
        v => MixRatio::single(v.pool_index().expect("pool variant")),
    };
    let assembly = assemble_balanced_set(
        train,
        pools,
        &ratio,
        derive(run_seed, &[tag("assemble"), variant.index() as u64]),
    )?;
    let summary = assembly.summary();
    Ok((assembly.dataset, Some(ratio), Some(summary)))
}

pub fn fit_variant(
    spec: &ClassifierSpec,
    classifier_index: usize,
    variant: Variant,
    train: &FeatureDataset,
    run_seed: u64,
) -> Result<ClassifierModel> {
    spec.fit(
        train,
        derive(run_seed, &[tag("fit"), classifier_index as u64, variant.index() as u64]),
    )
}

pub fn score_model(model: &ClassifierModel, test: &FeatureDataset) -> Result<MetricBundle> {
    let predicted = model.predict(test.features())?;
    MetricBundle::score(test.labels(), &predicted)
}

/// Owns the held-out rows. Every dataset handed to a training-side stage is
/// checked against the test ids; the rows themselves are only released for
/// final scoring (or, labelled, for paper-faithful fitness).
pub struct TestGuard {
    test: FeatureDataset,
    ids: HashSet<u64>,
    audit: LeakageAudit,
}

impl TestGuard {
    pub fn new(test: FeatureDataset, paper_faithful: bool) -> Self {
        let ids = test.real_ids();
        TestGuard {
            audit: LeakageAudit {
                paper_faithful,
                test_rows: test.len(),
                ..Default::default()
            },
            test,
            ids,
        }
    }

    /// Fails if any real row of `ds` is a test row.
    pub fn check(&mut self, stage: &str, ds: &FeatureDataset) -> Result<()> {
        self.audit.datasets_checked += 1;
        let overlap = ds
            .origins()
            .iter()
            .filter_map(|o| o.real_id())
            .filter(|id| self.ids.contains(id))
            .count();
        if overlap > 0 {
            self.audit.pre_evaluation_test_references += overlap;
            return Err(Error::Leakage(format!("{overlap} test rows reached stage `{stage}`")));
        }
        Ok(())
    }

    /// Test rows used as the fitness set in paper-faithful mode.
    pub fn expose_for_fitness(&mut self) -> &FeatureDataset {
        self.audit.fitness_exposures += 1;
        &self.test
    }

    pub fn read_for_evaluation(&mut self) -> &FeatureDataset {
        self.audit.evaluation_reads += 1;
        &self.test
    }

    pub fn audit(&self) -> &LeakageAudit {
        &self.audit
    }
}

struct Clock<'a> {
    timings: &'a mut Vec<StageTiming>,
    repetition: usize,
}

impl Clock<'_> {
    fn time<T>(&mut self, stage: String, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(StageTiming {
            repetition: self.repetition,
            stage,
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }
}

/// Stage name and error of a failed step.
type StageError = (String, Error);

fn at<T>(stage: &str, r: Result<T>) -> std::result::Result<T, StageError> {
    r.map_err(|e| (stage.to_string(), e))
}

fn run_repetition(
    cfg: &ExperimentConfig,
    repetition: usize,
    out: &mut RunResult,
    audit: &mut LeakageAudit,
    clock: &mut Clock<'_>,
    progress: &mut dyn FnMut(&str),
) -> std::result::Result<(), StageError> {
    let seed = out.seed;
    progress(&format!("[run {repetition}] prepare"));
    let prepared = clock.time("prepare".into(), || at("prepare", prepare(cfg, seed)))?;
    out.data = Some(prepared.summary.clone());
    let PreparedData { train, test, .. } = prepared;
    let mut guard = TestGuard::new(test, cfg.paper_faithful_fitness);
    let result = run_stages(cfg, repetition, seed, &train, &mut guard, out, clock, progress);
    audit.merge(guard.audit());
    result
}

#[allow(clippy::too_many_arguments)]
fn run_stages(
    cfg: &ExperimentConfig,
    repetition: usize,
    seed: u64,
    train: &FeatureDataset,
    guard: &mut TestGuard,
    out: &mut RunResult,
    clock: &mut Clock<'_>,
    progress: &mut dyn FnMut(&str),
) -> std::result::Result<(), StageError> {
    at("prepare", guard.check("prepare", train))?;
    progress(&format!("[run {repetition}] generate"));
    at("generate", guard.check("generate", &train.with_label(true)))?;
    let (pools, quality) = clock.time("generate".into(), || at("generate", build_pools(cfg, train, seed)))?;
    out.pool_quality = quality;

    let mut search: Option<SearchData> = None;
    for (ci, spec) in cfg.classifiers.iter().enumerate() {
        let name = spec.family().to_string();
        out.classifiers.push(ClassifierRun {
            classifier: name.clone(),
            variants: Vec::new(),
            ga: None,
        });
        let mut ga_ratio = None;
        for variant in Variant::ALL {
            let stage = format!("{name}/{variant}");
            if variant == Variant::GaOptimized {
                progress(&format!("[run {repetition}] {name}: search"));
                let search_stage = format!("{name}/search");
                if search.is_none() {
                    let faithful = cfg.paper_faithful_fitness.then(|| guard.expose_for_fitness().clone());
                    let data = clock.time("search-data".into(), || {
                        at(&search_stage, search_data(cfg, train, &pools, faithful.as_ref(), seed))
                    })?;
                    at(&search_stage, guard.check(&search_stage, &data.mixing_base))?;
                    if faithful.is_none() {
                        at(&search_stage, guard.check(&search_stage, &data.validation))?;
                    }
                    search = Some(data);
                }
                let data = search.as_ref().expect("search data built above");
                let ctx = at(&search_stage, fitness_context(spec, ci, data, seed))?;
                let ga = clock.time(search_stage.clone(), || {
                    at(
                        &search_stage,
                        search_mixture(cfg, ci, &ctx, seed, |g| {
                            progress(&format!(
                                "[run {repetition}] {name}: generation {} best {:.4} mean {:.4}",
                                g.generation, g.best, g.mean
                            ))
                        }),
                    )
                })?;
                ga_ratio = Some(ga.best_ratio);
                out.classifiers[ci].ga = Some(ga);
            }
            progress(&format!("[run {repetition}] {stage}"));
            let (set, ratio, assembly) = at(
                &stage,
                variant_training_set(variant, train, &pools, ga_ratio.as_ref(), seed),
            )?;
            at(&stage, guard.check(&stage, &set))?;
            let model = clock.time(format!("{stage}/fit"), || {
                at(&stage, fit_variant(spec, ci, variant, &set, seed))
            })?;
            let metrics = at(&stage, score_model(&model, guard.read_for_evaluation()))?;
            out.classifiers[ci].variants.push(VariantResult {
                variant,
                metrics,
                ratio,
                assembly,
            });
        }
    }
    Ok(())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with_progress(cfg, &mut |_| {})
}

/// Runs every repetition; a failing stage ends the experiment with a
/// partial report that keeps everything finished so far.
pub fn run_experiment_with_progress(
    cfg: &ExperimentConfig,
    progress: &mut dyn FnMut(&str),
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut stages = Vec::new();
    let mut runs = Vec::with_capacity(cfg.repetitions);
    let mut audit = LeakageAudit {
        paper_faithful: cfg.paper_faithful_fitness,
        ..Default::default()
    };
    let mut status = RunStatus::Complete;
    for repetition in 0..cfg.repetitions {
        let mut run = RunResult {
            repetition,
            seed: repetition_seed(cfg.seed, repetition),
            data: None,
            pool_quality: Vec::new(),
            classifiers: Vec::new(),
        };
        let mut clock = Clock {
            timings: &mut stages,
            repetition,
        };
        let outcome = run_repetition(cfg, repetition, &mut run, &mut audit, &mut clock, progress);
        runs.push(run);
        if let Err((stage, cause)) = outcome {
            progress(&format!("[run {repetition}] stopped at {stage}: {cause}"));
            status = RunStatus::Partial {
                repetition,
                stage,
                cause: cause.to_string(),
            };
            break;
        }
    }
    let body = ReportBody::assemble(cfg.clone(), status, runs, audit);
    Ok(ExperimentReport {
        body,
        timings: Timings {
            total_seconds: start.elapsed().as_secs_f64(),
            stages,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{NbParams, TreeParams};
    use crate::data::FixtureSpec;
    use crate::ga::GaConfig;

    pub(crate) fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            data: DataSource::Fixture {
                spec: FixtureSpec {
                    positives: 60,
                    negatives: 3000,
                    ..Default::default()
                },
            },
            classifiers: vec![ClassifierSpec::GaussianNb(NbParams::default())],
            ga: GaConfig {
                population_size: 12,
                iterations: 3,
                ..Default::default()
            },
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn prepare_splits_and_normalizes() {
        let cfg = small_config();
        let p = prepare(&cfg, 1).unwrap();
        // 60:3000 is richer than 1:100, so positives are thinned to 30
        assert_eq!(p.summary.rows_after_subsampling, 3030);
        assert_eq!((p.summary.train_positive, p.summary.test_positive), (21, 9));
        assert_eq!((p.summary.train_negative, p.summary.test_negative), (2100, 900));
        assert_eq!(p.summary.need, 2079);
        assert!(p.train.real_ids().is_disjoint(&p.test.real_ids()));
        assert!(p.train.features().as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn pools_sized_to_need() {
        let cfg = small_config();
        let p = prepare(&cfg, 1).unwrap();
        let (pools, quality) = build_pools(&cfg, &p.train, 1).unwrap();
        assert_eq!(pools.len(), 3);
        assert!(pools.iter().all(|pool| pool.len() == p.summary.need));
        assert_eq!(quality.len(), 3);
    }

    #[test]
    fn guard_rejects_test_rows() {
        let cfg = small_config();
        let p = prepare(&cfg, 1).unwrap();
        let mut guard = TestGuard::new(p.test.clone(), false);
        assert!(guard.check("train", &p.train).is_ok());
        let leaked = p.test.subset(&[0, 1]);
        assert!(matches!(guard.check("bad", &leaked), Err(Error::Leakage(_))));
        assert_eq!(guard.audit().pre_evaluation_test_references, 2);
        assert_eq!(guard.audit().datasets_checked, 2);
    }

    #[test]
    fn single_classifier_report_shape() {
        let report = run_experiment(&small_config()).unwrap();
        let body = &report.body;
        assert_eq!(body.status, RunStatus::Complete);
        assert_eq!(body.table.len(), 1);
        assert_eq!(body.table[0].cells.len(), 5);
        for cell in &body.table[0].cells {
            let v = cell.mean.unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
        let audit = &body.leakage;
        assert_eq!(audit.pre_evaluation_test_references, 0);
        assert_eq!(audit.evaluation_reads, 5);
        assert_eq!(audit.fitness_exposures, 0);
        assert!(audit.datasets_checked >= 8);
        let r = body.best_ratios[0].ratios[0].shares();
        assert!((r.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn same_seed_same_body() {
        let cfg = small_config();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a.body).unwrap(),
            serde_json::to_string(&b.body).unwrap()
        );
    }

    #[test]
    fn paper_faithful_mode_is_labelled() {
        let cfg = ExperimentConfig {
            paper_faithful_fitness: true,
            ..small_config()
        };
        let report = run_experiment(&cfg).unwrap();
        assert!(report.body.leakage.paper_faithful);
        assert_eq!(report.body.leakage.fitness_exposures, 1);
        assert_eq!(report.body.leakage.pre_evaluation_test_references, 0);
    }

    #[test]
    fn failing_stage_gives_partial_report() {
        let mut cfg = small_config();
        cfg.classifiers = vec![
            ClassifierSpec::DecisionTree(TreeParams::default()),
            ClassifierSpec::Svm(crate::classifiers::SvmParams {
                max_iterations: 1,
                ..Default::default()
            }),
        ];
        let report = run_experiment(&cfg).unwrap();
        match &report.body.status {
            RunStatus::Partial { stage, cause, .. } => {
                assert_eq!(stage, "svm/imbalanced");
                assert!(cause.contains("converge"), "{cause}");
            }
            s => panic!("expected partial, got {s:?}"),
        }
        // the tree row survived
        assert!(report.body.table[0].cells.iter().all(|c| c.mean.is_some()));
        assert!(report.body.table[1].cells.iter().all(|c| c.mean.is_none()));
    }

    #[test]
    fn missing_csv_is_a_prepare_failure() {
        let cfg = ExperimentConfig {
            data: DataSource::Csv {
                path: "/nonexistent/smart.csv".into(),
                model: None,
            },
            ..small_config()
        };
        let report = run_experiment(&cfg).unwrap();
        assert!(matches!(&report.body.status, RunStatus::Partial { stage, .. } if stage == "prepare"));
    }
}
