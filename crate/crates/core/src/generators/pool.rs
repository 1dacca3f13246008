use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{column_moments, GeneratorKind};
use crate::data::{FeatureDataset, FeatureMatrix, FeatureSchema};
use crate::error::{Error, Result};

/// Positive-labelled synthetic rows in normalized feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPool {
    schema: FeatureSchema,
    rows: FeatureMatrix,
    source: GeneratorKind,
    provenance: String,
}

impl SyntheticPool {
    /// Checks width and that every value is finite and within `[-1, 1]`.
    pub fn new(schema: FeatureSchema, rows: FeatureMatrix, source: GeneratorKind, provenance: String) -> Result<Self> {
        if rows.n_cols() != schema.len() {
            return Err(Error::Schema(format!(
                "pool rows have {} features, schema has {}",
                rows.n_cols(),
                schema.len()
            )));
        }
        for (i, row) in rows.rows().enumerate() {
            if let Some(j) = row.iter().position(|v| !(-1.0..=1.0).contains(v)) {
                return Err(Error::PoolRow {
                    row: i,
                    column: schema.features()[j].column_name(),
                    reason: format!("value {} outside [-1, 1]", row[j]),
                });
            }
        }
        Ok(SyntheticPool {
            schema,
            rows,
            source,
            provenance,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn rows(&self) -> &FeatureMatrix {
        &self.rows
    }

    pub fn source(&self) -> GeneratorKind {
        self.source
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.rows.n_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Loads a pre-normalized pool: one column per schema feature in schema
/// order, plus an optional trailing `label` column that must be all 1.
pub fn load_external_pool(path: &Path, schema: &FeatureSchema) -> Result<SyntheticPool> {
    let mut reader = csv::Reader::from_reader(File::open(path).map_err(|e| Error::io(path, e))?);
    let headers = reader.headers()?.clone();
    let names = schema.column_names();
    let has_label = headers.len() == names.len() + 1 && headers.get(names.len()).map(str::trim) == Some("label");
    if headers.len() != names.len() + has_label as usize {
        return Err(Error::Schema(format!(
            "{}: {} columns, expected {} features (plus optional `label`)",
            path.display(),
            headers.len(),
            names.len()
        )));
    }
    for (h, name) in headers.iter().zip(&names) {
        if h.trim() != name {
            return Err(Error::Schema(format!(
                "{}: column `{}` where `{name}` expected",
                path.display(),
                h.trim()
            )));
        }
    }

    let mut rows = FeatureMatrix::empty(names.len());
    let mut row = vec![0.0; names.len()];
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Schema(format!(
                "{}: row {i} has {} columns, expected {}",
                path.display(),
                record.len(),
                headers.len()
            )));
        }
        for (j, v) in row.iter_mut().enumerate() {
            let cell = record[j].trim();
            *v = cell.parse().map_err(|_| Error::PoolRow {
                row: i,
                column: names[j].clone(),
                reason: format!("unparseable value `{cell}`"),
            })?;
        }
        if has_label {
            let label = record[names.len()].trim();
            if label != "1" {
                return Err(Error::PoolRow {
                    row: i,
                    column: "label".into(),
                    reason: format!("pools hold positive rows only, found label `{label}`"),
                });
            }
        }
        rows.push_row(&row)?;
    }
    SyntheticPool::new(
        schema.clone(),
        rows,
        GeneratorKind::External,
        format!("loaded from {}", path.display()),
    )
}

/// Writes a pool in the external-pool CSV format (with a `label` column).
pub fn write_pool_csv(pool: &SyntheticPool, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path).map_err(|e| Error::io(path, e))?);
    let mut header = pool.schema.column_names();
    header.push("label".into());
    w.write_record(&header)?;
    for row in pool.rows.rows() {
        let mut record: Vec<String> = row.iter().map(f64::to_string).collect();
        record.push("1".into());
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDelta {
    pub feature: String,
    pub pool_mean: f64,
    pub reference_mean: f64,
    pub mean_delta: f64,
    pub pool_stddev: f64,
    pub reference_stddev: f64,
    pub stddev_delta: f64,
}

/// Diagnostic comparison of a pool against the real minority rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolQualityReport {
    pub source: GeneratorKind,
    pub pool_size: usize,
    pub reference_size: usize,
    pub out_of_range_fraction: f64,
    pub features: Vec<FeatureDelta>,
}

/// Deltas are absolute differences, pool against reference.
pub fn validate_pool(pool: &SyntheticPool, reference: &FeatureDataset) -> Result<PoolQualityReport> {
    if pool.is_empty() {
        return Err(Error::EmptyDataset(Some("pool".into())));
    }
    if reference.is_empty() {
        return Err(Error::EmptyDataset(Some("reference".into())));
    }
    if reference.schema() != pool.schema() {
        return Err(Error::Schema("pool and reference schemas differ".into()));
    }
    let out_of_range = pool
        .rows
        .as_slice()
        .iter()
        .filter(|v| !(-1.0..=1.0).contains(*v))
        .count();
    let features = pool
        .schema
        .column_names()
        .into_iter()
        .zip(
            column_moments(&pool.rows)
                .into_iter()
                .zip(column_moments(reference.features())),
        )
        .map(|(feature, ((pm, ps), (rm, rs)))| FeatureDelta {
            feature,
            pool_mean: pm,
            reference_mean: rm,
            mean_delta: (pm - rm).abs(),
            pool_stddev: ps,
            reference_stddev: rs,
            stddev_delta: (ps - rs).abs(),
        })
        .collect();
    Ok(PoolQualityReport {
        source: pool.source,
        pool_size: pool.len(),
        reference_size: reference.len(),
        out_of_range_fraction: out_of_range as f64 / pool.rows.as_slice().len() as f64,
        features,
    })
}
