//! CSV and JSON file I/O.
//!
//! Data CSVs are plain numeric matrices: comma separator, decimal point,
//! no header unless the caller skips one. Floats are written in shortest
//! round-trip form, so written files parse back bit-identically.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use arsk_core::metrics::OutlierConfusion;
use arsk_core::simgen::{SimConfig, SimDataset};
use arsk_core::DataMatrix;
use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Read an n x p numeric matrix from a CSV file.
pub fn read_matrix_csv(path: &Path, has_header: bool) -> CliResult<DataMatrix> {
    let file = File::open(path)
        .map_err(|e| CliError::Parse(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Parse(format!("CSV error: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(record.len());
        for (c, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                CliError::Parse(format!(
                    "line {line}, column {}: invalid number {field:?}",
                    c + 1
                ))
            })?;
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(CliError::Parse(format!(
                    "line {line}: expected {} columns, found {}",
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    DataMatrix::from_rows(rows)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// Write a matrix as headerless CSV with shortest round-trip floats.
pub fn write_matrix_csv(path: &Path, values: &Array2<f64>) -> CliResult<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in values.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Ground-truth sidecar written next to a simulated dataset.
/// Labels are 1-based cluster ids; `informative` holds 0-based column
/// indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SimConfig,
    pub labels: Vec<usize>,
    pub outlier_flags: Vec<bool>,
    pub informative: Vec<usize>,
    pub true_means: Vec<Vec<f64>>,
}

impl GroundTruth {
    pub fn from_dataset(data: &SimDataset) -> Self {
        GroundTruth {
            config: data.config,
            labels: data.true_labels.clone(),
            outlier_flags: data.outlier_flags.clone(),
            informative: data.informative.iter().copied().collect(),
            true_means: data
                .true_means
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
        }
    }
}

/// Metrics emitted by `arsk eval`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cer: f64,
    pub cer_with_outliers: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub outlier_confusion: OutlierConfusion,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let file = File::open(path)
        .map_err(|e| CliError::Parse(format!("cannot open {}: {e}", path.display())))?;
    Ok(serde_json::from_reader(file)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?)
}
