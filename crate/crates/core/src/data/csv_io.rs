//! CSV schema: `meas_1,...,meas_52,faultNumber`. Real TE exports in this
//! layout drop straight into the harness.

use super::{Dataset, DataError, FEATURE_COUNT};
use crate::linalg::Matrix;
use std::path::Path;

/// The exact expected header fields.
pub fn expected_header() -> Vec<String> {
    let mut h: Vec<String> = (1..=FEATURE_COUNT).map(|i| format!("meas_{i}")).collect();
    h.push("faultNumber".to_string());
    h
}

/// Header line of the documented schema.
pub const CSV_HEADER: &str = "meas_1..meas_52,faultNumber";

/// A loaded dataset plus how many excluded-fault rows were dropped.
#[derive(Debug)]
pub struct CsvLoad {
    pub dataset: Dataset,
    pub dropped_excluded: usize,
}

/// Parse a TE-style CSV. Rows labeled with the excluded faults (3, 9, 15)
/// are dropped and counted; every other defect is an error naming the
/// offending row and column.
pub fn load_csv(path: &Path) -> Result<CsvLoad, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;

    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let expected = expected_header();
    for want in &expected {
        if !header.contains(want) {
            return Err(DataError::MissingColumn(want.clone()));
        }
    }
    for got in &header {
        if !expected.contains(got) {
            return Err(DataError::UnexpectedColumn(got.clone()));
        }
    }
    // All names present exactly once; record the column order.
    let col_of: Vec<usize> = expected
        .iter()
        .map(|want| header.iter().position(|h| h == want).unwrap())
        .collect();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut dropped = 0usize;
    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // 1-based, after the header line
        let record = record?;
        if record.len() != expected.len() {
            return Err(DataError::WrongFieldCount {
                row,
                expected: expected.len(),
                found: record.len(),
            });
        }
        let label_text = record[col_of[FEATURE_COUNT]].trim();
        let label: u8 = label_text
            .parse()
            .ok()
            .filter(|&l| l <= 20)
            .ok_or_else(|| DataError::BadLabel {
                row,
                value: label_text.to_string(),
            })?;
        if super::is_excluded(label) {
            dropped += 1;
            continue;
        }
        let mut values = Vec::with_capacity(FEATURE_COUNT);
        for c in 0..FEATURE_COUNT {
            let text = record[col_of[c]].trim();
            let v: f32 = text.parse().ok().filter(|v: &f32| v.is_finite()).ok_or_else(|| {
                DataError::BadCell {
                    row,
                    column: expected[c].clone(),
                    value: text.to_string(),
                }
            })?;
            values.push(v);
        }
        rows.extend_from_slice(&values);
        labels.push(label);
    }

    let n = labels.len();
    let dataset = Dataset::new(Matrix::from_vec(n, FEATURE_COUNT, rows).unwrap(), labels)?;
    Ok(CsvLoad {
        dataset,
        dropped_excluded: dropped,
    })
}

/// Write a dataset in the documented schema. Floats use Rust's shortest
/// round-trip formatting, so write -> load is lossless and byte-stable.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(expected_header())?;
    for i in 0..ds.len() {
        let mut record: Vec<String> = ds.features().row(i).iter().map(|v| v.to_string()).collect();
        record.push(ds.labels()[i].to_string());
        writer.write_record(record)?;
    }
    writer.flush()?;
    Ok(())
}
