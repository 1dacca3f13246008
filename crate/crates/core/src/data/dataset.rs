use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::schema::FeatureSchema;
use crate::error::{Error, Result};

/// Dense row-major matrix of feature values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n_cols: usize,
}

impl FeatureMatrix {
    pub fn empty(n_cols: usize) -> Self {
        FeatureMatrix {
            data: Vec::new(),
            n_cols,
        }
    }

    pub fn from_flat(data: Vec<f64>, n_cols: usize) -> Result<Self> {
        if n_cols == 0 || !data.len().is_multiple_of(n_cols) {
            return Err(Error::Schema(format!(
                "{} values cannot form rows of width {n_cols}",
                data.len()
            )));
        }
        Ok(FeatureMatrix { data, n_cols })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], n_cols: usize) -> Result<Self> {
        let mut m = FeatureMatrix::empty(n_cols);
        for row in rows {
            m.push_row(row.as_ref())?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_cols {
            return Err(Error::Schema(format!(
                "row has {} values, expected {}",
                row.len(),
                self.n_cols
            )));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.n_cols.max(1)
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.n_cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Where a row came from. Real rows carry a stable id assigned at ingestion;
/// synthetic rows name their pool slot and index within that pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowOrigin {
    Real(u64),
    Synthetic { pool: u8, index: u32 },
}

impl RowOrigin {
    pub fn real_id(&self) -> Option<u64> {
        match *self {
            RowOrigin::Real(id) => Some(id),
            RowOrigin::Synthetic { .. } => None,
        }
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self, RowOrigin::Synthetic { .. })
    }
}

impl fmt::Display for RowOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowOrigin::Real(id) => write!(f, "real:{id}"),
            RowOrigin::Synthetic { pool, index } => write!(f, "synthetic:{pool}:{index}"),
        }
    }
}

impl FromStr for RowOrigin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("bad row origin `{s}`"));
        let mut parts = s.split(':');
        match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some("real"), Some(id), None, None) => Ok(RowOrigin::Real(id.parse().map_err(|_| bad())?)),
            (Some("synthetic"), Some(pool), Some(index), None) => Ok(RowOrigin::Synthetic {
                pool: pool.parse().map_err(|_| bad())?,
                index: index.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

/// Feature rows with binary labels (`true` = failed disk).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDataset {
    schema: FeatureSchema,
    x: FeatureMatrix,
    labels: Vec<bool>,
    origins: Vec<RowOrigin>,
}

impl FeatureDataset {
    pub fn new(schema: FeatureSchema, x: FeatureMatrix, labels: Vec<bool>, origins: Vec<RowOrigin>) -> Result<Self> {
        if x.n_cols() != schema.len() {
            return Err(Error::Schema(format!(
                "matrix width {} does not match schema width {}",
                x.n_cols(),
                schema.len()
            )));
        }
        if x.n_rows() != labels.len() || labels.len() != origins.len() {
            return Err(Error::Schema(format!(
                "{} rows, {} labels, {} origins",
                x.n_rows(),
                labels.len(),
                origins.len()
            )));
        }
        Ok(FeatureDataset {
            schema,
            x,
            labels,
            origins,
        })
    }

    /// Builds a dataset of real rows numbered `0..n`.
    pub fn from_rows<R: AsRef<[f64]>>(schema: FeatureSchema, rows: &[R], labels: Vec<bool>) -> Result<Self> {
        let x = FeatureMatrix::from_rows(rows, schema.len())?;
        let origins = (0..labels.len() as u64).map(RowOrigin::Real).collect();
        FeatureDataset::new(schema, x, labels, origins)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.x
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn origins(&self) -> &[RowOrigin] {
        &self.origins
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn n_negative(&self) -> usize {
        self.len() - self.n_positive()
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.n_positive();
        p > 0 && p < self.len()
    }

    pub fn indices_of(&self, label: bool) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> FeatureDataset {
        let mut x = FeatureMatrix::empty(self.n_features());
        x.data.reserve(indices.len() * self.n_features());
        for &i in indices {
            x.data.extend_from_slice(self.x.row(i));
        }
        FeatureDataset {
            schema: self.schema.clone(),
            x,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            origins: indices.iter().map(|&i| self.origins[i]).collect(),
        }
    }

    pub fn with_label(&self, label: bool) -> FeatureDataset {
        self.subset(&self.indices_of(label))
    }

    /// Appends rows, checking width.
    pub fn extend_rows(&mut self, rows: &FeatureMatrix, label: bool, origins: &[RowOrigin]) -> Result<()> {
        if rows.n_cols() != self.n_features() {
            return Err(Error::Schema(format!(
                "appended rows have width {}, expected {}",
                rows.n_cols(),
                self.n_features()
            )));
        }
        if rows.n_rows() != origins.len() {
            return Err(Error::Schema("origin count does not match row count".into()));
        }
        self.x.data.extend_from_slice(rows.as_slice());
        self.labels.extend(std::iter::repeat_n(label, rows.n_rows()));
        self.origins.extend_from_slice(origins);
        Ok(())
    }

    pub fn real_ids(&self) -> HashSet<u64> {
        self.origins.iter().filter_map(RowOrigin::real_id).collect()
    }

    pub(crate) fn features_mut(&mut self) -> &mut FeatureMatrix {
        &mut self.x
    }
}

/// Writes a dataset as CSV: `origin`, one column per schema feature, `label`.
pub fn write_dataset_csv(ds: &FeatureDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path).map_err(|e| Error::io(path, e))?);
    let mut header = vec!["origin".to_string()];
    header.extend(ds.schema().column_names());
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut record = vec![ds.origins[i].to_string()];
        record.extend(ds.row(i).iter().map(|v| v.to_string()));
        record.push(if ds.labels[i] { "1".into() } else { "0".into() });
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset_csv`].
pub fn read_dataset_csv(path: &Path, schema: &FeatureSchema) -> Result<FeatureDataset> {
    let mut r = csv::Reader::from_reader(File::open(path).map_err(|e| Error::io(path, e))?);
    let headers = r.headers()?.clone();
    let expected: Vec<String> = std::iter::once("origin".to_string())
        .chain(schema.column_names())
        .chain(std::iter::once("label".to_string()))
        .collect();
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Schema(format!(
            "{}: header does not match `{}`",
            path.display(),
            expected.join(",")
        )));
    }
    let mut x = FeatureMatrix::empty(schema.len());
    let mut labels = Vec::new();
    let mut origins = Vec::new();
    let mut row = vec![0.0; schema.len()];
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let bad = |what: &str| Error::InvalidInput(format!("{}: data row {}: {what}", path.display(), line + 1));
        origins.push(record[0].parse()?);
        for (j, v) in row.iter_mut().enumerate() {
            *v = record[j + 1].trim().parse().map_err(|_| bad("unparseable value"))?;
        }
        x.push_row(&row)?;
        labels.push(match record[schema.len() + 1].trim() {
            "1" => true,
            "0" => false,
            _ => return Err(bad("label must be 0 or 1")),
        });
    }
    FeatureDataset::new(schema.clone(), x, labels, origins)
}
