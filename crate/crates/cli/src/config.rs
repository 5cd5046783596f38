//! The TOML run configuration. Unknown keys are rejected up front; every
//! value is range-checked before any work starts, and error messages name
//! the offending field. See docs/CONFIG.md for the schema.

use serde::Deserialize;
use std::path::PathBuf;
use tinycompress::bench::{DataSource, GridConfig};
use tinycompress::compress::{ClusterConfig, Pipeline, PipelineConfig, PruneConfig, QuantConfig};
use tinycompress::data::NegativeMode;
use tinycompress::nn::{Architecture, TrainConfig};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub architecture: Option<Vec<usize>>,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub prune: PruneSection,
    #[serde(default)]
    pub cluster: ClusterSection,
    #[serde(default)]
    pub quantize: QuantizeSection,
    #[serde(default)]
    pub finetune: FinetuneSection,
    #[serde(default)]
    pub grid: GridSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// "synth" or "csv".
    pub source: Option<String>,
    pub samples_per_fault: Option<usize>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: Option<f32>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub l2_penalty: Option<f32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneSection {
    /// "sparsity" or "threshold".
    pub mode: Option<String>,
    pub value: Option<f32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSection {
    pub clusters: Option<usize>,
    pub max_iters: Option<usize>,
    pub finetune_epochs: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizeSection {
    pub bits: Option<u8>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneSection {
    pub learning_rate: Option<f32>,
    pub batch_size: Option<usize>,
    pub l2_penalty: Option<f32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub pipelines: Option<Vec<String>>,
    pub test_fraction: Option<f32>,
    /// "normal-only" or "all-other-faults".
    pub negatives: Option<String>,
    pub faults: Option<Vec<u8>>,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
    }

    pub fn architecture(&self) -> Result<Architecture, String> {
        match &self.architecture {
            None => Ok(Architecture::default_te()),
            Some(sizes) => {
                Architecture::new(sizes.clone()).map_err(|e| format!("architecture: {e}"))
            }
        }
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig, String> {
        let defaults = TrainConfig::default();
        let cfg = TrainConfig {
            learning_rate: self.train.learning_rate.unwrap_or(defaults.learning_rate),
            batch_size: self.train.batch_size.unwrap_or(defaults.batch_size),
            epochs: self.train.epochs.unwrap_or(defaults.epochs),
            l2_penalty: self.train.l2_penalty.unwrap_or(defaults.l2_penalty),
            seed,
        };
        cfg.validate().map_err(|e| format!("train: {e}"))?;
        Ok(cfg)
    }

    pub fn pipeline_config(&self, seed: u64) -> Result<PipelineConfig, String> {
        let defaults = PipelineConfig::default_with_seed(seed);

        let prune = match (self.prune.mode.as_deref(), self.prune.value) {
            (None, None) => defaults.prune,
            (Some("sparsity") | None, Some(v)) => PruneConfig::TargetSparsity(v),
            (Some("threshold"), Some(v)) => PruneConfig::Threshold(v),
            (Some("sparsity") | Some("threshold"), None) => {
                return Err("prune.value is required when prune.mode is set".into())
            }
            (Some(other), _) => {
                return Err(format!(
                    "prune.mode must be \"sparsity\" or \"threshold\", got \"{other}\""
                ))
            }
        };
        prune.validate().map_err(|e| format!("prune: {e}"))?;

        let cluster = ClusterConfig {
            clusters: self.cluster.clusters.unwrap_or(defaults.cluster.clusters),
            max_iters: self.cluster.max_iters.unwrap_or(defaults.cluster.max_iters),
            finetune_epochs: self
                .cluster
                .finetune_epochs
                .unwrap_or(defaults.cluster.finetune_epochs),
            seed,
        };
        cluster.validate().map_err(|e| format!("cluster: {e}"))?;

        let quantize = QuantConfig {
            bits: self.quantize.bits.unwrap_or(defaults.quantize.bits),
        };
        quantize.validate().map_err(|e| format!("quantize: {e}"))?;

        let cfg = PipelineConfig {
            prune,
            cluster,
            quantize,
            finetune_learning_rate: self
                .finetune
                .learning_rate
                .unwrap_or(defaults.finetune_learning_rate),
            finetune_batch_size: self
                .finetune
                .batch_size
                .unwrap_or(defaults.finetune_batch_size),
            finetune_l2_penalty: self
                .finetune
                .l2_penalty
                .unwrap_or(defaults.finetune_l2_penalty),
        };
        if !(cfg.finetune_learning_rate > 0.0) {
            return Err(format!(
                "finetune.learning_rate must be > 0, got {}",
                cfg.finetune_learning_rate
            ));
        }
        if cfg.finetune_batch_size == 0 {
            return Err("finetune.batch_size must be >= 1".into());
        }
        Ok(cfg)
    }

    pub fn data_source(&self) -> Result<DataSource, String> {
        match self.dataset.source.as_deref() {
            None | Some("synth") => {
                if self.dataset.path.is_some() && self.dataset.source.as_deref() != Some("csv") {
                    return Err("dataset.path is only valid with dataset.source = \"csv\"".into());
                }
                let spf = self.dataset.samples_per_fault.unwrap_or(120);
                if spf == 0 {
                    return Err("dataset.samples_per_fault must be >= 1".into());
                }
                Ok(DataSource::Synth {
                    samples_per_fault: spf,
                })
            }
            Some("csv") => {
                let path = self
                    .dataset
                    .path
                    .clone()
                    .ok_or("dataset.path is required when dataset.source = \"csv\"")?;
                Ok(DataSource::Csv(path))
            }
            Some(other) => Err(format!(
                "dataset.source must be \"synth\" or \"csv\", got \"{other}\""
            )),
        }
    }

    pub fn pipelines(&self) -> Result<Vec<Pipeline>, String> {
        match &self.grid.pipelines {
            None => Ok(Pipeline::all_seven().to_vec()),
            Some(tags) => {
                if tags.is_empty() {
                    return Err("grid.pipelines must not be empty".into());
                }
                tags.iter()
                    .map(|t| {
                        Pipeline::parse(t).map_err(|e| format!("grid.pipelines entry \"{t}\": {e}"))
                    })
                    .collect()
            }
        }
    }

    pub fn test_fraction(&self) -> Result<f32, String> {
        let tf = self.grid.test_fraction.unwrap_or(0.25);
        if !(tf > 0.0 && tf < 1.0) {
            return Err(format!("grid.test_fraction must be in (0, 1), got {tf}"));
        }
        Ok(tf)
    }

    pub fn negative_mode(&self) -> Result<NegativeMode, String> {
        match self.grid.negatives.as_deref() {
            None | Some("normal-only") => Ok(NegativeMode::NormalOnly),
            Some("all-other-faults") => Ok(NegativeMode::AllOtherFaults),
            Some(other) => Err(format!(
                "grid.negatives must be \"normal-only\" or \"all-other-faults\", got \"{other}\""
            )),
        }
    }

    pub fn faults(&self) -> Result<Vec<u8>, String> {
        match &self.grid.faults {
            None => Ok(tinycompress::data::included_faults()),
            Some(faults) => {
                for &f in faults {
                    if f > 20 {
                        return Err(format!("grid.faults entry {f} is out of range 0..=20"));
                    }
                    if tinycompress::data::is_excluded(f) {
                        return Err(format!("grid.faults entry {f} is an excluded fault"));
                    }
                }
                Ok(faults.clone())
            }
        }
    }

    /// Assemble the full grid configuration.
    pub fn grid_config(
        &self,
        seed: u64,
        workers: Option<usize>,
        cache_dir: Option<PathBuf>,
    ) -> Result<GridConfig, String> {
        Ok(GridConfig {
            seed,
            source: self.data_source()?,
            arch: self.architecture()?,
            train: self.train_config(0)?,
            pipeline: self.pipeline_config(seed)?,
            pipelines: self.pipelines()?,
            faults: self.faults()?,
            test_fraction: self.test_fraction()?,
            negative_mode: self.negative_mode()?,
            workers: workers.or(self.workers).unwrap_or(4),
            cache_dir,
        })
    }
}

/// Render the resolved grid configuration back as TOML, so every run echoes
/// an exact replay recipe into its output directory.
pub fn echo_grid_config(cfg: &GridConfig) -> String {
    let mut out = String::new();
    use std::fmt::Write;
    writeln!(out, "# Resolved configuration (replayable)").unwrap();
    writeln!(out, "seed = {}", cfg.seed).unwrap();
    writeln!(out, "workers = {}", cfg.workers).unwrap();
    writeln!(out, "architecture = {:?}", cfg.arch.layer_sizes()).unwrap();
    writeln!(out, "\n[dataset]").unwrap();
    match &cfg.source {
        DataSource::Synth { samples_per_fault } => {
            writeln!(out, "source = \"synth\"").unwrap();
            writeln!(out, "samples_per_fault = {samples_per_fault}").unwrap();
        }
        DataSource::Csv(path) => {
            writeln!(out, "source = \"csv\"").unwrap();
            writeln!(out, "path = {:?}", path.display().to_string()).unwrap();
        }
    }
    writeln!(out, "\n[train]").unwrap();
    writeln!(out, "learning_rate = {}", cfg.train.learning_rate).unwrap();
    writeln!(out, "batch_size = {}", cfg.train.batch_size).unwrap();
    writeln!(out, "epochs = {}", cfg.train.epochs).unwrap();
    writeln!(out, "l2_penalty = {}", cfg.train.l2_penalty).unwrap();
    writeln!(out, "\n[prune]").unwrap();
    match cfg.pipeline.prune {
        PruneConfig::TargetSparsity(v) => {
            writeln!(out, "mode = \"sparsity\"\nvalue = {v}").unwrap();
        }
        PruneConfig::Threshold(v) => {
            writeln!(out, "mode = \"threshold\"\nvalue = {v}").unwrap();
        }
    }
    writeln!(out, "\n[cluster]").unwrap();
    writeln!(out, "clusters = {}", cfg.pipeline.cluster.clusters).unwrap();
    writeln!(out, "max_iters = {}", cfg.pipeline.cluster.max_iters).unwrap();
    writeln!(out, "finetune_epochs = {}", cfg.pipeline.cluster.finetune_epochs).unwrap();
    writeln!(out, "\n[quantize]").unwrap();
    writeln!(out, "bits = {}", cfg.pipeline.quantize.bits).unwrap();
    writeln!(out, "\n[finetune]").unwrap();
    writeln!(out, "learning_rate = {}", cfg.pipeline.finetune_learning_rate).unwrap();
    writeln!(out, "batch_size = {}", cfg.pipeline.finetune_batch_size).unwrap();
    writeln!(out, "l2_penalty = {}", cfg.pipeline.finetune_l2_penalty).unwrap();
    writeln!(out, "\n[grid]").unwrap();
    let tags: Vec<String> = cfg.pipelines.iter().map(|p| format!("{:?}", p.tag())).collect();
    writeln!(out, "pipelines = [{}]", tags.join(", ")).unwrap();
    writeln!(out, "test_fraction = {}", cfg.test_fraction).unwrap();
    writeln!(
        out,
        "negatives = {}",
        match cfg.negative_mode {
            NegativeMode::NormalOnly => "\"normal-only\"",
            NegativeMode::AllOtherFaults => "\"all-other-faults\"",
        }
    )
    .unwrap();
    writeln!(out, "faults = {:?}", cfg.faults).unwrap();
    out
}
