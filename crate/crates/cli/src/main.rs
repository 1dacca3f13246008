//! `mixbalance` command line: run an experiment end to end (`report`) or one
//! stage at a time, passing intermediate artifacts through an output
//! directory.
//!
//! Exit codes: 0 success, 1 configuration error, 2 stage failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mixbalance::classifiers::ClassifierSpec;
use mixbalance::data::{read_dataset_csv, write_dataset_csv, FeatureDataset};
use mixbalance::ga::{GaResult, MixRatio};
use mixbalance::generators::{load_external_pool, write_pool_csv, SyntheticPool};
use mixbalance::harness::{
    build_pools, fit_variant, fitness_context, prepare, render_report, repetition_seed, run_experiment_with_progress,
    score_model, search_data, search_mixture, variant_training_set, ExperimentConfig, ReportFormat, RunStatus, Variant,
};
use mixbalance::Error;

#[derive(Parser)]
#[command(
    name = "mixbalance",
    version,
    about = "GA-searched mixing of synthetic minority pools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, subsample, split and normalize the base data.
    Prepare(Common),
    /// Fit the generators on the training positives and sample the pools.
    Generate(Common),
    /// Search the mixing ratio for each classifier.
    Search {
        #[command(flatten)]
        common: Common,
        /// Only search for this classifier family.
        #[arg(long)]
        classifier: Option<String>,
    },
    /// Train on a balanced set with a given ratio and score on the test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Pool weights such as `6:0:1`; defaults to each classifier's
        /// search result in the output directory.
        #[arg(long)]
        ratio: Option<String>,
        #[arg(long)]
        classifier: Option<String>,
    },
    /// Full experiment; writes report.json, report.md and report.csv.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for artifacts.
    #[arg(long, default_value = "mixbalance-out")]
    out: PathBuf,
}

enum Failure {
    Config(String),
    Stage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            e => Failure::Stage(e.to_string()),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

impl Common {
    fn load(&self) -> Outcome<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path).map_err(|e| Failure::Config(e.to_string()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        fs::create_dir_all(&self.out).map_err(|e| Failure::Stage(format!("{}: {e}", self.out.display())))?;
        Ok(cfg)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// Stage commands work on the first repetition so their artifacts line up
/// with run 0 of a full report.
fn run_seed(cfg: &ExperimentConfig) -> u64 {
    repetition_seed(cfg.seed, 0)
}

fn write(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Stage(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::Stage(format!("{}: {e}", path.display())))
}

fn require(path: &Path, producer: &str) -> Outcome {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Stage(format!(
            "{} not found; run `{producer}` first",
            path.display()
        )))
    }
}

fn load_split(common: &Common, cfg: &ExperimentConfig, name: &str) -> Outcome<FeatureDataset> {
    let path = common.path(name);
    require(&path, "prepare")?;
    Ok(read_dataset_csv(&path, &cfg.features)?)
}

fn load_pools(common: &Common, cfg: &ExperimentConfig) -> Outcome<Vec<SyntheticPool>> {
    (1..=cfg.pools.len())
        .map(|p| {
            let path = common.path(&format!("pool_{p}.csv"));
            require(&path, "generate")?;
            Ok(load_external_pool(&path, &cfg.features)?)
        })
        .collect()
}

fn selected<'a>(cfg: &'a ExperimentConfig, only: Option<&str>) -> Outcome<Vec<(usize, &'a ClassifierSpec)>> {
    let chosen: Vec<_> = cfg
        .classifiers
        .iter()
        .enumerate()
        .filter(|(_, s)| only.is_none_or(|name| s.family().to_string() == name))
        .collect();
    if chosen.is_empty() {
        return Err(Failure::Config(format!(
            "classifier `{}` is not in the config",
            only.unwrap_or_default()
        )));
    }
    Ok(chosen)
}

fn cmd_prepare(common: &Common) -> Outcome {
    let cfg = common.load()?;
    let data = prepare(&cfg, run_seed(&cfg))?;
    write_dataset_csv(&data.train, &common.path("train.csv"))?;
    write_dataset_csv(&data.test, &common.path("test.csv"))?;
    write(&common.path("normalizer.json"), &data.normalizer.to_json()?)?;
    write(&common.path("data_summary.json"), &to_json(&data.summary)?)?;
    let s = &data.summary;
    eprintln!(
        "train {}+/{}-, test {}+/{}-, {} synthetic positives needed",
        s.train_positive, s.train_negative, s.test_positive, s.test_negative, s.need
    );
    Ok(())
}

fn cmd_generate(common: &Common) -> Outcome {
    let cfg = common.load()?;
    let train = load_split(common, &cfg, "train.csv")?;
    let (pools, quality) = build_pools(&cfg, &train, run_seed(&cfg))?;
    for (p, pool) in pools.iter().enumerate() {
        write_pool_csv(pool, &common.path(&format!("pool_{}.csv", p + 1)))?;
        eprintln!("pool {}: {} rows from {}", p + 1, pool.len(), pool.source());
    }
    write(&common.path("pool_quality.json"), &to_json(&quality)?)?;
    Ok(())
}

fn cmd_search(common: &Common, classifier: Option<&str>) -> Outcome {
    let cfg = common.load()?;
    let seed = run_seed(&cfg);
    let train = load_split(common, &cfg, "train.csv")?;
    let pools = load_pools(common, &cfg)?;
    let faithful = if cfg.paper_faithful_fitness {
        eprintln!("warning: paper-faithful fitness scores the search on the test split");
        Some(load_split(common, &cfg, "test.csv")?)
    } else {
        None
    };
    let data = search_data(&cfg, &train, &pools, faithful.as_ref(), seed)?;
    for (ci, spec) in selected(&cfg, classifier)? {
        let name = spec.family().to_string();
        let ctx = fitness_context(spec, ci, &data, seed)?;
        let ga = search_mixture(&cfg, ci, &ctx, seed, |g| {
            eprintln!(
                "{name}: generation {} best {:.4} mean {:.4}",
                g.generation, g.best, g.mean
            )
        })?;
        eprintln!("{name}: best ratio {} (fitness {:.4})", ga.best_ratio, ga.best_fitness);
        write(&common.path(&format!("ga_{name}.json")), &ga.to_json()?)?;
    }
    Ok(())
}

fn cmd_evaluate(common: &Common, ratio: Option<&str>, classifier: Option<&str>) -> Outcome {
    let cfg = common.load()?;
    let given = ratio
        .map(|r| r.parse::<MixRatio>().map_err(|e| Failure::Config(e.to_string())))
        .transpose()?;
    let seed = run_seed(&cfg);
    let train = load_split(common, &cfg, "train.csv")?;
    let test = load_split(common, &cfg, "test.csv")?;
    let pools = load_pools(common, &cfg)?;
    let mut results = Vec::new();
    for (ci, spec) in selected(&cfg, classifier)? {
        let name = spec.family().to_string();
        let ratio = match given {
            Some(r) => r,
            None => {
                let path = common.path(&format!("ga_{name}.json"));
                if !path.exists() {
                    return Err(Failure::Config(format!(
                        "no --ratio given and {} not found",
                        path.display()
                    )));
                }
                GaResult::from_json(&read(&path)?)?.best_ratio
            }
        };
        let (set, _, assembly) = variant_training_set(Variant::GaOptimized, &train, &pools, Some(&ratio), seed)?;
        let model = fit_variant(spec, ci, Variant::GaOptimized, &set, seed)?;
        write(&common.path(&format!("model_{name}.json")), &model.to_json()?)?;
        let metrics = score_model(&model, &test)?;
        eprintln!("{name}: ratio {ratio} g-mean {:.4}", metrics.g_mean);
        results.push(serde_json::json!({
            "classifier": name,
            "ratio": ratio,
            "assembly": assembly,
            "metrics": metrics,
        }));
    }
    write(&common.path("evaluation.json"), &to_json(&results)?)?;
    Ok(())
}

fn cmd_report(common: &Common) -> Outcome {
    let cfg = common.load()?;
    let report = run_experiment_with_progress(&cfg, &mut |line| eprintln!("{line}"))?;
    write(
        &common.path("report.json"),
        &render_report(&report, ReportFormat::Json)?,
    )?;
    let markdown = render_report(&report, ReportFormat::Markdown)?;
    write(&common.path("report.md"), &markdown)?;
    write(&common.path("report.csv"), &render_report(&report, ReportFormat::Csv)?)?;
    print!("{markdown}");
    match &report.body.status {
        RunStatus::Complete => Ok(()),
        RunStatus::Partial {
            repetition,
            stage,
            cause,
        } => Err(Failure::Stage(format!(
            "run {repetition} stopped at `{stage}`: {cause} (partial report written)"
        ))),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Outcome<String> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::Stage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage_error { 1 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Prepare(c) => cmd_prepare(c),
        Command::Generate(c) => cmd_generate(c),
        Command::Search { common, classifier } => cmd_search(common, classifier.as_deref()),
        Command::Evaluate {
            common,
            ratio,
            classifier,
        } => cmd_evaluate(common, ratio.as_deref(), classifier.as_deref()),
        Command::Report(c) => cmd_report(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Stage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
