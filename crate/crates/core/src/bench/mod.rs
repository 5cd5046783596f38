//! Experiment orchestration: train the 18 baseline detectors, sweep the 7
//! compression pipelines over each, measure serialized sizes and accuracies,
//! and aggregate the paper-style metrics.
//!
//! Cells are independent, so faults run in parallel up to the configured
//! worker count; every cell derives its randomness from (master seed, fault,
//! purpose), which makes the report identical regardless of scheduling.

mod report;

pub use report::emit_report;

use crate::compress::{apply_pipeline, Pipeline, PipelineConfig};
use crate::data::{
    load_csv, make_binary_task, synth_te, DataError, Dataset, NegativeMode,
};
use crate::linalg::Rng;
use crate::modelfmt::{self, Model};
use crate::nn::{accuracy, train, Architecture, DenseModel, TrainConfig};
use rayon::prelude::*;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where the benchmark data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synth { samples_per_fault: usize },
    Csv(PathBuf),
}

/// Full configuration of a grid run.
#[derive(Debug, Clone)]
pub struct GridConfig {
    pub seed: u64,
    pub source: DataSource,
    pub arch: Architecture,
    pub train: TrainConfig,
    pub pipeline: PipelineConfig,
    pub pipelines: Vec<Pipeline>,
    pub faults: Vec<u8>,
    pub test_fraction: f32,
    pub negative_mode: NegativeMode,
    pub workers: usize,
    pub cache_dir: Option<PathBuf>,
}

impl GridConfig {
    /// The committed desk-scale study: surrogate data, all 18 detectors,
    /// all 7 pipelines, default compression configs.
    pub fn desk(seed: u64) -> Self {
        Self {
            seed,
            source: DataSource::Synth {
                samples_per_fault: 600,
            },
            arch: Architecture::default_te(),
            train: TrainConfig {
                learning_rate: 0.03,
                batch_size: 16,
                epochs: 40,
                l2_penalty: 3e-4,
                seed: 0,
            },
            pipeline: PipelineConfig::default(),
            pipelines: Pipeline::all_seven().to_vec(),
            faults: crate::data::included_faults(),
            test_fraction: 0.25,
            negative_mode: NegativeMode::NormalOnly,
            workers: 4,
            cache_dir: None,
        }
    }

    /// Stable fingerprint of everything a baseline depends on; compression
    /// settings are deliberately excluded so different pipelines reuse the
    /// same cached baselines.
    fn baseline_fingerprint(&self) -> u64 {
        let source = match &self.source {
            DataSource::Synth { samples_per_fault } => format!("synth:{samples_per_fault}"),
            DataSource::Csv(path) => format!("csv:{}", path.display()),
        };
        let text = format!(
            "v1|seed={}|arch={:?}|lr={}|batch={}|epochs={}|l2={}|src={}|tf={}|neg={:?}",
            self.seed,
            self.arch.layer_sizes(),
            self.train.learning_rate,
            self.train.batch_size,
            self.train.epochs,
            self.train.l2_penalty,
            source,
            self.test_fraction,
            self.negative_mode,
        );
        fnv1a64(text.as_bytes())
    }
}

fn fnv1a64(data: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in data {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

// Seed-derivation purposes.
const PURPOSE_DATA: u64 = 1;
const PURPOSE_SPLIT: u64 = 2;
const PURPOSE_TRAIN: u64 = 3;
const PURPOSE_CLUSTER: u64 = 4;

fn derived_seed(master: u64, purpose: u64, fault: u8) -> u64 {
    Rng::new(master).split(purpose).split(fault as u64).seed()
}

/// One (fault, pipeline) measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub fault: u8,
    pub pipeline: Pipeline,
    pub baseline_size: u64,
    pub baseline_acc: f64,
    pub compressed_size: u64,
    pub compressed_acc: f64,
    /// `100 * (1 - compressed_size / baseline_size)`, full precision.
    pub compressed_rate: f64,
    /// `compressed_acc - baseline_acc`, percentage points.
    pub acc_change: f64,
}

/// A cell that could not be measured; the grid keeps going.
#[derive(Debug, Clone, PartialEq)]
pub struct FailedCell {
    pub fault: u8,
    pub pipeline: Option<Pipeline>,
    pub error: String,
}

/// Per-pipeline aggregates over the successful rows (population variance).
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineAggregate {
    pub pipeline: Pipeline,
    pub rows: usize,
    pub mean_rate: f64,
    pub var_rate: f64,
    pub mean_change: f64,
    pub var_change: f64,
    pub mean_compressed_acc: f64,
}

#[derive(Debug, Clone)]
pub struct GridReport {
    pub rows: Vec<ReportRow>,
    pub failures: Vec<FailedCell>,
    pub aggregates: Vec<PipelineAggregate>,
    pub complete: bool,
}

impl GridReport {
    pub fn aggregate_for(&self, pipeline: Pipeline) -> Option<&PipelineAggregate> {
        self.aggregates.iter().find(|a| a.pipeline == pipeline)
    }

    pub fn rows_for(&self, pipeline: Pipeline) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(move |r| r.pipeline == pipeline)
    }
}

/// Derive one report row from measured sizes and accuracies. Values are
/// stored at full precision; table emission rounds to 0.1 for display.
pub fn compute_metrics(
    fault: u8,
    pipeline: Pipeline,
    baseline_size: u64,
    baseline_acc: f64,
    compressed_size: u64,
    compressed_acc: f64,
) -> ReportRow {
    let compressed_rate = 100.0 * (1.0 - compressed_size as f64 / baseline_size as f64);
    ReportRow {
        fault,
        pipeline,
        baseline_size,
        baseline_acc,
        compressed_size,
        compressed_acc,
        compressed_rate,
        acc_change: compressed_acc - baseline_acc,
    }
}

fn aggregate(pipelines: &[Pipeline], rows: &[ReportRow]) -> Vec<PipelineAggregate> {
    pipelines
        .iter()
        .map(|&pipeline| {
            let values: Vec<&ReportRow> =
                rows.iter().filter(|r| r.pipeline == pipeline).collect();
            let n = values.len() as f64;
            let mean = |f: fn(&ReportRow) -> f64| -> f64 {
                values.iter().map(|r| f(r)).sum::<f64>() / n
            };
            let var = |f: fn(&ReportRow) -> f64, m: f64| -> f64 {
                values.iter().map(|r| (f(r) - m).powi(2)).sum::<f64>() / n
            };
            let mean_rate = mean(|r| r.compressed_rate);
            let mean_change = mean(|r| r.acc_change);
            PipelineAggregate {
                pipeline,
                rows: values.len(),
                mean_rate,
                var_rate: var(|r| r.compressed_rate, mean_rate),
                mean_change,
                var_change: var(|r| r.acc_change, mean_change),
                mean_compressed_acc: mean(|r| r.compressed_acc),
            }
        })
        .collect()
}

/// Load or synthesize the dataset named by the config.
pub fn load_dataset(cfg: &GridConfig) -> Result<Dataset, BenchError> {
    match &cfg.source {
        DataSource::Synth { samples_per_fault } => Ok(synth_te(
            Rng::new(cfg.seed).split(PURPOSE_DATA).seed(),
            *samples_per_fault,
        )),
        DataSource::Csv(path) => Ok(load_csv(path)?.dataset),
    }
}

/// Train (or load from cache) the baseline detector for one fault.
fn baseline_for(
    cfg: &GridConfig,
    task_train: &crate::nn::LabeledData,
    fault: u8,
) -> Result<DenseModel, String> {
    let cache_path = cfg.cache_dir.as_ref().map(|dir| {
        dir.join(format!(
            "baseline_f{fault:02}_{:016x}.tcmp",
            cfg.baseline_fingerprint()
        ))
    });
    if let Some(path) = &cache_path {
        if path.exists() {
            if let Ok(Model::Dense(model)) = modelfmt::read_file(path) {
                if model.arch() == &cfg.arch {
                    return Ok(model);
                }
            }
            // Unreadable or mismatched cache entries are retrained below.
        }
    }

    let init = DenseModel::init_seeded(
        cfg.arch.clone(),
        derived_seed(cfg.seed, PURPOSE_TRAIN, fault),
    );
    let train_cfg = TrainConfig {
        seed: derived_seed(cfg.seed, PURPOSE_TRAIN, fault) ^ 0x5eed,
        ..cfg.train.clone()
    };
    let model = train(&init, task_train, &train_cfg)
        .map_err(|e| format!("training failed: {e}"))?
        .model;

    if let Some(path) = &cache_path {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| format!("cache dir: {e}"))?;
        }
        modelfmt::write_file(path, &Model::Dense(model.clone()))
            .map_err(|e| format!("cache write: {e}"))?;
    }
    Ok(model)
}

fn run_fault(cfg: &GridConfig, ds: &Dataset, fault: u8) -> (Vec<ReportRow>, Vec<FailedCell>) {
    let fail_all = |error: String| {
        let failures = cfg
            .pipelines
            .iter()
            .map(|&p| FailedCell {
                fault,
                pipeline: Some(p),
                error: error.clone(),
            })
            .collect();
        (Vec::new(), failures)
    };

    let task = match make_binary_task(
        ds,
        fault,
        derived_seed(cfg.seed, PURPOSE_SPLIT, fault),
        cfg.test_fraction,
        cfg.negative_mode,
    ) {
        Ok(t) => t,
        Err(e) => return fail_all(format!("task construction: {e}")),
    };

    let baseline = match baseline_for(cfg, &task.train, fault) {
        Ok(m) => m,
        Err(e) => return fail_all(e),
    };
    let baseline_size = match modelfmt::size_bytes(&Model::Dense(baseline.clone())) {
        Ok(s) => s as u64,
        Err(e) => return fail_all(format!("baseline encode: {e}")),
    };
    let baseline_acc = match accuracy(&baseline, &task.test) {
        Ok(a) => a,
        Err(e) => return fail_all(format!("baseline eval: {e}")),
    };

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &pipeline in &cfg.pipelines {
        let mut pcfg = cfg.pipeline.clone();
        pcfg.cluster.seed = derived_seed(cfg.seed, PURPOSE_CLUSTER, fault);
        let cell = (|| -> Result<ReportRow, String> {
            let compressed = apply_pipeline(&baseline, pipeline, &pcfg, Some(&task.train))
                .map_err(|e| format!("pipeline: {e}"))?;
            let size = modelfmt::size_bytes(&Model::Compressed(compressed.clone()))
                .map_err(|e| format!("encode: {e}"))? as u64;
            let acc = compressed
                .accuracy(&task.test)
                .map_err(|e| format!("eval: {e}"))?;
            Ok(compute_metrics(
                fault,
                pipeline,
                baseline_size,
                baseline_acc,
                size,
                acc,
            ))
        })();
        match cell {
            Ok(row) => rows.push(row),
            Err(error) => failures.push(FailedCell {
                fault,
                pipeline: Some(pipeline),
                error,
            }),
        }
    }
    (rows, failures)
}

/// Run the whole study. Deterministic given the config.
pub fn run_grid(cfg: &GridConfig) -> Result<GridReport, BenchError> {
    let ds = load_dataset(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;

    let per_fault: Vec<(Vec<ReportRow>, Vec<FailedCell>)> = pool.install(|| {
        cfg.faults
            .par_iter()
            .map(|&fault| run_fault(cfg, &ds, fault))
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in per_fault {
        rows.extend(r);
        failures.extend(f);
    }
    // Deterministic assembly order: (fault, pipeline position).
    let pos = |p: Pipeline| cfg.pipelines.iter().position(|&x| x == p).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| (r.fault, pos(r.pipeline)));
    failures.sort_by_key(|f| (f.fault, f.pipeline.map(pos)));

    let aggregates = aggregate(&cfg.pipelines, &rows);
    let complete = failures.is_empty();
    Ok(GridReport {
        rows,
        failures,
        aggregates,
        complete,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress::PruneConfig;

    pub(crate) fn toy_grid_config(seed: u64) -> GridConfig {
        GridConfig {
            seed,
            source: DataSource::Synth {
                samples_per_fault: 24,
            },
            arch: Architecture::new(vec![52, 12, 8, 2]).unwrap(),
            train: TrainConfig {
                learning_rate: 0.05,
                batch_size: 8,
                epochs: 4,
                l2_penalty: 1e-4,
                seed: 0,
            },
            pipeline: PipelineConfig {
                cluster: crate::compress::ClusterConfig {
                    clusters: 8,
                    finetune_epochs: 1,
                    ..Default::default()
                },
                ..PipelineConfig::default()
            },
            pipelines: Pipeline::all_seven().to_vec(),
            faults: vec![0, 6],
            test_fraction: 0.25,
            negative_mode: NegativeMode::NormalOnly,
            workers: 2,
            cache_dir: None,
        }
    }

    #[test]
    fn metric_arithmetic_examples() {
        let p = Pipeline::parse("p").unwrap();
        let row = compute_metrics(0, p, 486_924, 94.4, 175_207, 94.4);
        assert!((row.compressed_rate - 64.0).abs() < 0.05);
        assert_eq!(row.acc_change, 0.0);

        let row = compute_metrics(0, p, 486_924, 94.4, 41_391, 94.4);
        assert!((row.compressed_rate - 91.5).abs() < 0.05);

        let row = compute_metrics(3, p, 1000, 90.0, 1000, 88.5);
        assert_eq!(row.compressed_rate, 0.0);
        assert!((row.acc_change + 1.5).abs() < 1e-12);
    }

    #[test]
    fn toy_grid_structure() {
        let report = run_grid(&toy_grid_config(5)).unwrap();
        assert_eq!(report.rows.len(), 14, "2 faults x 7 pipelines");
        assert!(report.complete, "failures: {:?}", report.failures);
        for row in &report.rows {
            assert!(row.compressed_rate < 100.0);
            assert!((0.0..=100.0).contains(&row.compressed_acc));
        }
        // Rows are ordered by (fault, pipeline position).
        let keys: Vec<(u8, usize)> = report
            .rows
            .iter()
            .map(|r| {
                (
                    r.fault,
                    Pipeline::all_seven().iter().position(|&p| p == r.pipeline).unwrap(),
                )
            })
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn grid_is_deterministic() {
        let a = run_grid(&toy_grid_config(9)).unwrap();
        let mut cfg = toy_grid_config(9);
        cfg.workers = 1; // scheduling must not matter
        let b = run_grid(&cfg).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.aggregates, b.aggregates);
    }

    #[test]
    fn threshold_zero_prune_changes_nothing() {
        let mut cfg = toy_grid_config(3);
        cfg.pipeline.prune = PruneConfig::Threshold(0.0);
        cfg.pipelines = vec![Pipeline::parse("p").unwrap()];
        let report = run_grid(&cfg).unwrap();
        assert!(report.complete);
        for row in &report.rows {
            assert_eq!(row.acc_change, 0.0, "fault {}", row.fault);
            assert!(
                row.compressed_size > row.baseline_size,
                "sparse overhead at zero sparsity"
            );
        }
    }

    #[test]
    fn aggregates_recompute_from_rows() {
        let report = run_grid(&toy_grid_config(7)).unwrap();
        for agg in &report.aggregates {
            let rates: Vec<f64> = report
                .rows_for(agg.pipeline)
                .map(|r| r.compressed_rate)
                .collect();
            let changes: Vec<f64> =
                report.rows_for(agg.pipeline).map(|r| r.acc_change).collect();
            let n = rates.len() as f64;
            let mean_rate = rates.iter().sum::<f64>() / n;
            let var_rate = rates.iter().map(|r| (r - mean_rate).powi(2)).sum::<f64>() / n;
            let mean_change = changes.iter().sum::<f64>() / n;
            let var_change =
                changes.iter().map(|c| (c - mean_change).powi(2)).sum::<f64>() / n;
            assert!((agg.mean_rate - mean_rate).abs() < 1e-9);
            assert!((agg.var_rate - var_rate).abs() < 1e-9);
            assert!((agg.mean_change - mean_change).abs() < 1e-9);
            assert!((agg.var_change - var_change).abs() < 1e-9);
        }
    }

    #[test]
    fn baseline_cache_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = toy_grid_config(11);
        cfg.faults = vec![6];
        cfg.pipelines = vec![Pipeline::parse("q").unwrap()];
        cfg.cache_dir = Some(dir.path().to_path_buf());
        let a = run_grid(&cfg).unwrap();
        let cached: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(cached.len(), 1, "one baseline cached");
        // Second run loads the cache and reproduces the rows exactly.
        let b = run_grid(&cfg).unwrap();
        assert_eq!(a.rows, b.rows);
    }
}
