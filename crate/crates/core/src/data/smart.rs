use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{FeatureDataset, FeatureMatrix, RowOrigin};
use super::schema::{FeatureKey, FeatureSchema};
use crate::error::{Error, Result};

/// One line of Backblaze drive-stats telemetry, restricted to the columns the
/// loader understands. Absent or empty attribute cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub date: String,
    pub serial: String,
    pub model: String,
    pub failure: bool,
    pub attributes: BTreeMap<FeatureKey, Option<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    /// Rows lacking at least one schema feature.
    pub dropped_missing: usize,
    /// Rows with an unparseable numeric cell or failure flag.
    pub rejected_unparseable: usize,
    /// Rows skipped by the model filter.
    pub filtered_model: usize,
}

struct Columns {
    date: usize,
    serial: usize,
    model: usize,
    failure: usize,
    features: Vec<(FeatureKey, usize)>,
}

impl Columns {
    fn locate(headers: &csv::StringRecord, schema: &FeatureSchema) -> Result<Self> {
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let mut features = Vec::with_capacity(schema.len());
        for key in schema.features() {
            features.push((*key, find(&key.column_name())?));
        }
        Ok(Columns {
            date: find("date")?,
            serial: find("serial_number")?,
            model: find("model")?,
            failure: find("failure")?,
            features,
        })
    }
}

enum Cell {
    Value(f64),
    Missing,
}

fn parse_cell(s: &str) -> Option<Cell> {
    let s = s.trim();
    if s.is_empty() {
        return Some(Cell::Missing);
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite()).map(Cell::Value)
}

impl RawRecord {
    fn parse(record: &csv::StringRecord, cols: &Columns) -> Option<RawRecord> {
        let failure = match record.get(cols.failure)?.trim() {
            "0" => false,
            "1" => true,
            _ => return None,
        };
        let mut attributes = BTreeMap::new();
        for &(key, idx) in &cols.features {
            let value = match parse_cell(record.get(idx).unwrap_or(""))? {
                Cell::Value(v) => Some(v),
                Cell::Missing => None,
            };
            attributes.insert(key, value);
        }
        Some(RawRecord {
            date: record.get(cols.date)?.trim().to_string(),
            serial: record.get(cols.serial)?.trim().to_string(),
            model: record.get(cols.model)?.trim().to_string(),
            failure,
            attributes,
        })
    }

    /// Projects onto `schema` order, or `None` when a feature is missing.
    pub fn project(&self, schema: &FeatureSchema) -> Option<Vec<f64>> {
        schema
            .features()
            .iter()
            .map(|k| self.attributes.get(k).copied().flatten())
            .collect()
    }
}

/// Loads Backblaze-format SMART telemetry, keeping the schema's columns.
pub fn load_smart_csv(path: &Path, schema: &FeatureSchema) -> Result<(FeatureDataset, LoadReport)> {
    load_smart_csv_filtered(path, schema, None)
}

/// Like [`load_smart_csv`], keeping only rows whose `model` equals `model`.
///
/// Row origins are the zero-based data-line numbers of the input file.
pub fn load_smart_csv_filtered(
    path: &Path,
    schema: &FeatureSchema,
    model: Option<&str>,
) -> Result<(FeatureDataset, LoadReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(File::open(path).map_err(|e| Error::io(path, e))?);
    let cols = Columns::locate(reader.headers()?, schema)?;

    let mut report = LoadReport::default();
    let mut x = FeatureMatrix::empty(schema.len());
    let mut labels = Vec::new();
    let mut origins = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        report.rows_read += 1;
        let Some(raw) = RawRecord::parse(&record, &cols) else {
            report.rejected_unparseable += 1;
            continue;
        };
        if model.is_some_and(|m| m != raw.model) {
            report.filtered_model += 1;
            continue;
        }
        let Some(row) = raw.project(schema) else {
            report.dropped_missing += 1;
            continue;
        };
        x.push_row(&row)?;
        labels.push(raw.failure);
        origins.push(RowOrigin::Real(line as u64));
    }
    report.rows_kept = labels.len();
    if labels.is_empty() {
        return Err(Error::EmptyDataset(Some(format!(
            "{}: no usable rows ({} read, {} missing, {} unparseable)",
            path.display(),
            report.rows_read,
            report.dropped_missing,
            report.rejected_unparseable
        ))));
    }
    Ok((FeatureDataset::new(schema.clone(), x, labels, origins)?, report))
}
