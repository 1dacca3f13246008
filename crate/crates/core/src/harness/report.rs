use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::DataSummary;
use crate::error::{Error, Result};
use crate::ga::{AssemblySummary, GaResult, MixRatio};
use crate::generators::PoolQualityReport;
use crate::metrics::MetricBundle;

/// Training set a model was fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "imbalanced")]
    Imbalanced,
    #[serde(rename = "pool_1")]
    Pool1,
    #[serde(rename = "pool_2")]
    Pool2,
    #[serde(rename = "pool_3")]
    Pool3,
    #[serde(rename = "ga_optimized")]
    GaOptimized,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Imbalanced,
        Variant::Pool1,
        Variant::Pool2,
        Variant::Pool3,
        Variant::GaOptimized,
    ];

    pub fn index(self) -> usize {
        Variant::ALL.iter().position(|&v| v == self).expect("listed")
    }

    pub fn pool_index(self) -> Option<usize> {
        match self {
            Variant::Pool1 => Some(0),
            Variant::Pool2 => Some(1),
            Variant::Pool3 => Some(2),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Imbalanced => "imbalanced",
            Variant::Pool1 => "pool_1",
            Variant::Pool2 => "pool_2",
            Variant::Pool3 => "pool_3",
            Variant::GaOptimized => "ga_optimized",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Partial {
        repetition: usize,
        stage: String,
        cause: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageAudit {
    /// Fitness was scored on the test rows (labelled, non-default protocol).
    pub paper_faithful: bool,
    pub test_rows: usize,
    /// Training-side datasets compared against the test ids.
    pub datasets_checked: usize,
    /// Test rows found in any of them. Must be zero.
    pub pre_evaluation_test_references: usize,
    /// Times the test rows were handed to a fitness context.
    pub fitness_exposures: usize,
    /// Times the test rows were released for scoring a trained model.
    pub evaluation_reads: usize,
    pub models_evaluated: usize,
}

impl LeakageAudit {
    pub(crate) fn merge(&mut self, other: &LeakageAudit) {
        self.test_rows += other.test_rows;
        self.datasets_checked += other.datasets_checked;
        self.pre_evaluation_test_references += other.pre_evaluation_test_references;
        self.fitness_exposures += other.fitness_exposures;
        self.evaluation_reads += other.evaluation_reads;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub variant: Variant,
    pub metrics: MetricBundle,
    /// Pool shares used for balancing; absent for the imbalanced baseline.
    pub ratio: Option<MixRatio>,
    pub assembly: Option<AssemblySummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierRun {
    pub classifier: String,
    pub variants: Vec<VariantResult>,
    pub ga: Option<GaResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub repetition: usize,
    pub seed: u64,
    pub data: Option<DataSummary>,
    pub pool_quality: Vec<PoolQualityReport>,
    pub classifiers: Vec<ClassifierRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub mean: Option<f64>,
    /// Test G-mean of each finished repetition.
    pub runs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub classifier: String,
    /// One cell per entry of [`Variant::ALL`].
    pub cells: Vec<TableCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub classifier: String,
    pub ratios: Vec<MixRatio>,
    pub fitness: Vec<f64>,
}

/// Everything that depends only on the config and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBody {
    pub config: ExperimentConfig,
    pub status: RunStatus,
    pub variants: Vec<Variant>,
    pub pool_sources: Vec<String>,
    pub table: Vec<TableRow>,
    pub best_ratios: Vec<RatioRow>,
    pub leakage: LeakageAudit,
    pub runs: Vec<RunResult>,
}

impl ReportBody {
    pub(crate) fn assemble(
        config: ExperimentConfig,
        status: RunStatus,
        runs: Vec<RunResult>,
        mut leakage: LeakageAudit,
    ) -> Self {
        let names: Vec<String> = config.classifiers.iter().map(|s| s.family().to_string()).collect();
        let table = names
            .iter()
            .enumerate()
            .map(|(ci, name)| TableRow {
                classifier: name.clone(),
                cells: Variant::ALL
                    .iter()
                    .map(|&v| {
                        let runs: Vec<f64> = runs
                            .iter()
                            .filter_map(|r| r.classifiers.get(ci))
                            .filter_map(|c| c.variants.iter().find(|x| x.variant == v))
                            .map(|x| x.metrics.g_mean)
                            .collect();
                        let mean = (!runs.is_empty()).then(|| runs.iter().sum::<f64>() / runs.len() as f64);
                        TableCell { mean, runs }
                    })
                    .collect(),
            })
            .collect();
        let best_ratios = names
            .iter()
            .enumerate()
            .map(|(ci, name)| {
                let gas: Vec<&GaResult> = runs
                    .iter()
                    .filter_map(|r| r.classifiers.get(ci))
                    .filter_map(|c| c.ga.as_ref())
                    .collect();
                RatioRow {
                    classifier: name.clone(),
                    ratios: gas.iter().map(|g| g.best_ratio).collect(),
                    fitness: gas.iter().map(|g| g.best_fitness).collect(),
                }
            })
            .collect();
        leakage.models_evaluated = runs.iter().flat_map(|r| &r.classifiers).map(|c| c.variants.len()).sum();
        ReportBody {
            pool_sources: config.pools.iter().map(|p| p.kind().to_string()).collect(),
            config,
            status,
            variants: Variant::ALL.to_vec(),
            table,
            best_ratios,
            leakage,
            runs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub repetition: usize,
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub stages: Vec<StageTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub body: ReportBody,
    /// Wall-clock only; excluded from reproducibility comparisons.
    pub timings: Timings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::Config(format!("unknown report format `{s}`"))),
        }
    }
}

impl ExperimentReport {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// JSON of the deterministic part only.
    pub fn body_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.body)?)
    }
}

fn column_titles(body: &ReportBody) -> Vec<String> {
    body.variants
        .iter()
        .map(|v| match v.pool_index() {
            Some(p) => format!(
                "Pool {} ({})",
                p + 1,
                body.pool_sources.get(p).map_or("?", |s| s.as_str())
            ),
            None if *v == Variant::Imbalanced => "Imbalanced".to_string(),
            None => "GA-optimized".to_string(),
        })
        .collect()
}

fn markdown(report: &ReportBody) -> String {
    let mut s = String::new();
    let cfg = &report.config;
    s.push_str("# Mixing experiment report\n\n");
    if let RunStatus::Partial {
        repetition,
        stage,
        cause,
    } = &report.status
    {
        let _ = writeln!(
            s,
            "> **PARTIAL RUN** — stopped in repetition {repetition} at stage `{stage}`: {cause}\n"
        );
    }
    let protocol = if cfg.paper_faithful_fitness {
        "paper-faithful (fitness scored on the test set)".to_string()
    } else {
        format!(
            "inner validation ({:.0}% of the training split)",
            cfg.inner_validation_fraction * 100.0
        )
    };
    let _ = writeln!(
        s,
        "Master seed {}, {} repetition(s), imbalance {}, test fraction {}, fitness protocol: {protocol}.\n",
        cfg.seed, cfg.repetitions, cfg.imbalance_ratio, cfg.test_fraction
    );

    s.push_str("## Optimal mixing ratios found by the GA\n\n");
    let _ = writeln!(
        s,
        "| Classifier | Ratio ({}) | Fitness |",
        report.pool_sources.join(" : ")
    );
    s.push_str("|---|---|---|\n");
    for row in &report.best_ratios {
        let ratios = if row.ratios.is_empty() {
            "—".to_string()
        } else {
            row.ratios.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("; ")
        };
        let fitness = if row.fitness.is_empty() {
            "—".to_string()
        } else {
            row.fitness
                .iter()
                .map(|f| format!("{f:.3}"))
                .collect::<Vec<_>>()
                .join("; ")
        };
        let _ = writeln!(s, "| {} | {ratios} | {fitness} |", row.classifier);
    }

    s.push_str("\n## Test G-mean by training set\n\n");
    let _ = writeln!(s, "| Classifier | {} |", column_titles(report).join(" | "));
    let _ = writeln!(s, "|---|{}", "---|".repeat(report.variants.len()));
    for row in &report.table {
        let cells: Vec<String> = row
            .cells
            .iter()
            .map(|c| c.mean.map_or("—".to_string(), |m| format!("{m:.3}")))
            .collect();
        let _ = writeln!(s, "| {} | {} |", row.classifier, cells.join(" | "));
    }
    if cfg.repetitions > 1 {
        let _ = writeln!(
            s,
            "\nCells are means over {} repetitions; per-run values are in the JSON report.",
            cfg.repetitions
        );
    }

    let a = &report.leakage;
    s.push_str("\n## Test-set audit\n\n");
    let _ = writeln!(s, "- datasets checked before scoring: {}", a.datasets_checked);
    let _ = writeln!(s, "- test rows found in them: {}", a.pre_evaluation_test_references);
    let _ = writeln!(
        s,
        "- test set released for scoring: {} times for {} models",
        a.evaluation_reads, a.models_evaluated
    );
    if a.paper_faithful {
        let _ = writeln!(
            s,
            "- test set used as GA fitness data: {} times (paper-faithful mode)",
            a.fitness_exposures
        );
    }
    s
}

fn csv(report: &ReportBody) -> String {
    let mut s = String::from("classifier");
    for v in &report.variants {
        let _ = write!(s, ",{v}");
    }
    s.push('\n');
    for row in &report.table {
        s.push_str(&row.classifier);
        for c in &row.cells {
            s.push(',');
            if let Some(m) = c.mean {
                let _ = write!(s, "{m}");
            }
        }
        s.push('\n');
    }
    s
}

pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    Ok(match format {
        ReportFormat::Json => serde_json::to_string_pretty(report)?,
        ReportFormat::Markdown => markdown(&report.body),
        ReportFormat::Csv => csv(&report.body),
    })
}
