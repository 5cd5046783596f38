//! Dataset ingestion and task construction: TE-style CSV parsing, the fault
//! catalog, one-vs-rest binary dataset construction with train-only
//! normalization, and a seeded synthetic surrogate generator.

pub mod catalog;
mod csv_io;
mod synth;

pub use catalog::{included_faults, is_excluded, FaultInfo, FaultType, CATALOG};
pub use csv_io::{load_csv, write_csv, CsvLoad, CSV_HEADER};
pub use synth::{base_process_stats, synth_te};

use crate::linalg::{Matrix, Rng};
use crate::nn::LabeledData;
use thiserror::Error;

/// Measurement count of the TE-style schema.
pub const FEATURE_COUNT: usize = 52;

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("missing column '{0}' in header")]
    MissingColumn(String),
    #[error("unexpected column '{0}' in header")]
    UnexpectedColumn(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    WrongFieldCount {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column '{column}': cannot parse '{value}' as a finite number")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: fault number {value} out of range 0..=20")]
    BadLabel { row: usize, value: String },
    #[error("fault {0} is out of range 0..=20")]
    UnknownFault(u8),
    #[error("fault {0} is excluded (faults 3, 9, 15 are undetectable)")]
    ExcludedFault(u8),
    #[error("class '{class}' for fault {fault} has {have} samples; need at least 2")]
    TooFewSamples {
        fault: u8,
        class: &'static str,
        have: usize,
    },
    #[error("test_fraction must be in (0, 1), got {0}")]
    BadSplit(f32),
    #[error("feature matrix has {0} columns; the schema requires {FEATURE_COUNT}")]
    BadFeatureCount(usize),
}

/// Feature matrix (one sample per row, 52 measurement columns) plus the
/// fault label of each sample. Read-only after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<u8>) -> Result<Self, DataError> {
        if features.cols() != FEATURE_COUNT {
            return Err(DataError::BadFeatureCount(features.cols()));
        }
        assert_eq!(features.rows(), labels.len(), "one label per sample");
        if let Some(&bad) = labels.iter().find(|&&l| l > 20) {
            return Err(DataError::UnknownFault(bad));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn count_for(&self, fault: u8) -> usize {
        self.labels.iter().filter(|&&l| l == fault).count()
    }
}

/// Per-feature z-score parameters, fitted on a training split only.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl NormStats {
    /// Fit on the given sample rows (population std; constant features get
    /// std 1 so normalization stays finite).
    fn fit(features: &Matrix, rows: &[usize]) -> Self {
        let cols = features.cols();
        let n = rows.len() as f64;
        let mut mean = vec![0.0f64; cols];
        for &r in rows {
            for (m, &v) in mean.iter_mut().zip(features.row(r)) {
                *m += v as f64;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0f64; cols];
        for &r in rows {
            let row = features.row(r);
            for c in 0..cols {
                let d = row[c] as f64 - mean[c];
                var[c] += d * d;
            }
        }
        let std: Vec<f32> = var
            .iter()
            .map(|&v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s as f32
                } else {
                    1.0
                }
            })
            .collect();
        Self {
            mean: mean.iter().map(|&m| m as f32).collect(),
            std,
        }
    }

    pub fn apply_row(&self, row: &[f32], out: &mut Vec<f32>) {
        for c in 0..row.len() {
            out.push((row[c] - self.mean[c]) / self.std[c]);
        }
    }
}

/// How the negative class of a detector is populated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativeMode {
    /// Negatives are fault-0 (normal) samples. The fault-0 detector itself
    /// always uses all other faults as negatives.
    NormalOnly,
    /// Negatives are every sample that is not the target fault.
    AllOtherFaults,
}

/// A one-vs-rest detection task: normalized train/test splits with binary
/// labels (1 = target fault present, 0 = negative class).
#[derive(Debug, Clone)]
pub struct BinaryTask {
    pub target_fault: u8,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub stats: NormStats,
    pub train: LabeledData,
    pub test: LabeledData,
}

/// Stratified split, normalization fitted on the training rows only and
/// applied to both splits. Deterministic given `split_seed`.
pub fn make_binary_task(
    ds: &Dataset,
    fault: u8,
    split_seed: u64,
    test_fraction: f32,
    mode: NegativeMode,
) -> Result<BinaryTask, DataError> {
    if fault > 20 {
        return Err(DataError::UnknownFault(fault));
    }
    if is_excluded(fault) {
        return Err(DataError::ExcludedFault(fault));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::BadSplit(test_fraction));
    }

    let positives: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == fault).collect();
    let negatives: Vec<usize> = (0..ds.len())
        .filter(|&i| {
            ds.labels[i] != fault
                && (fault == 0 || mode == NegativeMode::AllOtherFaults || ds.labels[i] == 0)
        })
        .collect();
    if positives.len() < 2 {
        return Err(DataError::TooFewSamples {
            fault,
            class: "positive",
            have: positives.len(),
        });
    }
    if negatives.len() < 2 {
        return Err(DataError::TooFewSamples {
            fault,
            class: "negative",
            have: negatives.len(),
        });
    }

    let rng = Rng::new(split_seed);
    let (pos_train, pos_test) = split_class(positives, test_fraction, &mut rng.split(1));
    let (neg_train, neg_test) = split_class(negatives, test_fraction, &mut rng.split(2));

    let mut train_indices = pos_train;
    train_indices.extend(neg_train);
    train_indices.sort_unstable();
    let mut test_indices = pos_test;
    test_indices.extend(neg_test);
    test_indices.sort_unstable();

    let stats = NormStats::fit(&ds.features, &train_indices);
    let materialize = |indices: &[usize]| {
        let mut rows = Vec::with_capacity(indices.len() * FEATURE_COUNT);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            stats.apply_row(ds.features.row(i), &mut rows);
            labels.push(usize::from(ds.labels[i] == fault));
        }
        LabeledData::new(
            Matrix::from_vec(indices.len(), FEATURE_COUNT, rows).unwrap(),
            labels,
        )
    };

    Ok(BinaryTask {
        target_fault: fault,
        train: materialize(&train_indices),
        test: materialize(&test_indices),
        train_indices,
        test_indices,
        stats,
    })
}

fn split_class(mut indices: Vec<usize>, test_fraction: f32, rng: &mut Rng) -> (Vec<usize>, Vec<usize>) {
    rng.shuffle(&mut indices);
    let n = indices.len();
    let n_test = ((n as f64 * test_fraction as f64).round() as usize).clamp(1, n - 1);
    let train = indices.split_off(n_test);
    (train, indices)
}
