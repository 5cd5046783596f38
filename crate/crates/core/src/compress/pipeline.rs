//! Pipeline orchestration: any subset of {prune, cluster, quantize} applied
//! in the canonical order P -> C -> Q. When clustering is present the
//! codebooks are fine-tuned on the provided training data; when clustering
//! and quantization are combined, quantization hits the codebook only.

use super::{
    cluster, cluster_finetune, prune, quantize, ClusterConfig, CompressError, CompressedModel,
    FinetuneConfig, PruneConfig, QuantConfig,
};
use crate::nn::{DenseModel, LabeledData};

/// A stage applied to a model, with its configuration; the provenance
/// record of a [`CompressedModel`] is a list of these.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Prune(PruneConfig),
    Cluster(ClusterConfig),
    Quantize(QuantConfig),
}

/// A subset of the three techniques. Stages always run as P -> C -> Q no
/// matter how the subset was written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pipeline {
    pub prune: bool,
    pub cluster: bool,
    pub quantize: bool,
}

impl Pipeline {
    /// Parse a stage string such as `"pcq"`, `"qp"`, or `"c"`. Order and
    /// repetition are ignored; unknown characters are rejected.
    pub fn parse(s: &str) -> Result<Self, CompressError> {
        let mut p = Pipeline {
            prune: false,
            cluster: false,
            quantize: false,
        };
        for ch in s.chars() {
            match ch.to_ascii_lowercase() {
                'p' => p.prune = true,
                'c' => p.cluster = true,
                'q' => p.quantize = true,
                other => return Err(CompressError::UnknownStage(other)),
            }
        }
        if !(p.prune || p.cluster || p.quantize) {
            return Err(CompressError::EmptyPipeline);
        }
        Ok(p)
    }

    /// Canonical tag: one of `p c q pc pq cq pcq`.
    pub fn tag(&self) -> &'static str {
        match (self.prune, self.cluster, self.quantize) {
            (true, false, false) => "p",
            (false, true, false) => "c",
            (false, false, true) => "q",
            (true, true, false) => "pc",
            (true, false, true) => "pq",
            (false, true, true) => "cq",
            (true, true, true) => "pcq",
            (false, false, false) => unreachable!("empty pipeline"),
        }
    }

    /// The seven nonempty subsets, singles first, then pairs, then all.
    pub fn all_seven() -> [Pipeline; 7] {
        ["p", "c", "q", "pc", "pq", "cq", "pcq"].map(|t| Pipeline::parse(t).unwrap())
    }
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Per-stage configuration for [`apply_pipeline`].
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub prune: PruneConfig,
    pub cluster: ClusterConfig,
    pub quantize: QuantConfig,
    pub finetune_learning_rate: f32,
    pub finetune_batch_size: usize,
    pub finetune_l2_penalty: f32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            prune: PruneConfig::TargetSparsity(0.75),
            cluster: ClusterConfig::default(),
            quantize: QuantConfig::default(),
            finetune_learning_rate: 0.01,
            finetune_batch_size: 16,
            finetune_l2_penalty: 1e-4,
        }
    }
}

impl PipelineConfig {
    /// Defaults with the clustering/fine-tune seed set.
    pub fn default_with_seed(seed: u64) -> Self {
        Self {
            cluster: ClusterConfig {
                seed,
                ..ClusterConfig::default()
            },
            ..Self::default()
        }
    }

    fn finetune_config(&self) -> FinetuneConfig {
        FinetuneConfig {
            learning_rate: self.finetune_learning_rate,
            batch_size: self.finetune_batch_size,
            epochs: self.cluster.finetune_epochs,
            l2_penalty: self.finetune_l2_penalty,
            seed: self.cluster.seed,
        }
    }
}

/// Run the selected stages over a dense model. `data` is required only when
/// clustering runs with a nonzero fine-tune epoch count.
pub fn apply_pipeline(
    model: &DenseModel,
    pipeline: Pipeline,
    cfg: &PipelineConfig,
    data: Option<&LabeledData>,
) -> Result<CompressedModel, CompressError> {
    if !(pipeline.prune || pipeline.cluster || pipeline.quantize) {
        return Err(CompressError::EmptyPipeline);
    }

    let mut current = if pipeline.prune {
        prune(model, &cfg.prune)?.0
    } else {
        CompressedModel::from_dense(model)
    };

    if pipeline.cluster {
        current = cluster(&current, &cfg.cluster)?;
        if cfg.cluster.finetune_epochs > 0 {
            let data = data.ok_or(CompressError::MissingData)?;
            current = cluster_finetune(&current, data, &cfg.finetune_config())?;
        }
    }

    if pipeline.quantize {
        current = quantize(&current, &cfg.quantize)?;
    }

    Ok(current)
}
