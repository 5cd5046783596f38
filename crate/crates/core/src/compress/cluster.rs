//! Weight sharing: per-layer 1-D k-means over the surviving weights, plus
//! codebook fine-tuning where each centroid moves by the summed gradient of
//! its member positions. Assignments never change after clustering.

use super::{
    CompressError, Codebook, CompressedLayer, CompressedModel, Pattern, Stage, Values,
};
use crate::linalg::{Matrix, Rng};
use crate::nn::{backward, LabeledData};

/// Per-layer clustering parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    /// Groups per layer; clamped to the number of distinct surviving weights.
    pub clusters: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Codebook fine-tuning epochs run by the pipeline after clustering.
    pub finetune_epochs: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            clusters: 128,
            max_iters: 100,
            seed: 0,
            finetune_epochs: 20,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), CompressError> {
        if self.clusters == 0 {
            return Err(CompressError::BadConfig("clusters must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(CompressError::BadConfig("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Result of a 1-D k-means run.
#[derive(Debug, Clone)]
pub struct KmeansFit {
    /// Ascending centroids; length is `min(k, distinct values)`.
    pub centroids: Vec<f32>,
    /// Cluster of each input value.
    pub assignments: Vec<u32>,
    /// Within-cluster sum of squares after each completed update.
    pub wcss_history: Vec<f64>,
}

/// Lloyd's algorithm specialised to one dimension: values are sorted once,
/// clusters are contiguous runs, assignment reduces to locating the
/// midpoints between adjacent centroids, and means come from prefix sums.
///
/// Initialization takes k evenly spaced quantiles of the value distribution.
/// An empty cluster is re-seeded at the value farthest from its current
/// centroid, which strictly lowers the objective on the next assignment.
/// Convergence is declared when assignments stabilize.
pub fn kmeans_1d(values: &[f32], k: usize, max_iters: usize) -> KmeansFit {
    assert!(!values.is_empty(), "kmeans_1d on empty input");
    let n = values.len();

    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted: Vec<f64> = perm.iter().map(|&i| values[i] as f64).collect();

    let distinct = 1 + sorted.windows(2).filter(|w| w[0] != w[1]).count();
    let k = k.min(distinct);

    // Prefix sums of values and squares for O(1) range means and WCSS.
    let mut ps = vec![0.0f64; n + 1];
    let mut pss = vec![0.0f64; n + 1];
    for i in 0..n {
        ps[i + 1] = ps[i] + sorted[i];
        pss[i + 1] = pss[i] + sorted[i] * sorted[i];
    }

    let mut centroids: Vec<f64> = if k == 1 {
        vec![sorted[n / 2]]
    } else {
        (0..k).map(|j| sorted[j * (n - 1) / (k - 1)]).collect()
    };

    let mut bounds = vec![0usize; k + 1];
    bounds[k] = n;
    let mut prev_bounds: Option<Vec<usize>> = None;
    let mut history = Vec::new();

    for _ in 0..max_iters {
        // Assignment: boundary j separates clusters j-1 and j at the
        // midpoint of their centroids.
        for j in 1..k {
            let mid = 0.5 * (centroids[j - 1] + centroids[j]);
            let lo = bounds[j - 1];
            bounds[j] = lo + sorted[lo..].partition_point(|&v| v <= mid);
        }

        if let Some(j) = (0..k).find(|&j| bounds[j] == bounds[j + 1]) {
            // Re-seed the empty cluster at the value farthest from its
            // assigned centroid, then try again.
            let mut far_val = sorted[0];
            let mut far_dist = -1.0f64;
            for c in 0..k {
                for i in bounds[c]..bounds[c + 1] {
                    let d = (sorted[i] - centroids[c]).abs();
                    if d > far_dist {
                        far_dist = d;
                        far_val = sorted[i];
                    }
                }
            }
            centroids[j] = far_val;
            centroids.sort_by(f64::total_cmp);
            prev_bounds = None;
            continue;
        }

        // Update step and objective.
        let mut wcss = 0.0;
        for j in 0..k {
            let (lo, hi) = (bounds[j], bounds[j + 1]);
            let count = (hi - lo) as f64;
            let mean = (ps[hi] - ps[lo]) / count;
            centroids[j] = mean;
            wcss += (pss[hi] - pss[lo]) - 2.0 * mean * (ps[hi] - ps[lo]) + count * mean * mean;
        }
        history.push(wcss.max(0.0));

        if prev_bounds.as_deref() == Some(&bounds) {
            break;
        }
        prev_bounds = Some(bounds.clone());
    }

    let mut assignments = vec![0u32; n];
    for j in 0..k {
        for i in bounds[j]..bounds[j + 1] {
            assignments[perm[i]] = j as u32;
        }
    }
    KmeansFit {
        centroids: centroids.iter().map(|&c| c as f32).collect(),
        assignments,
        wcss_history: history,
    }
}

/// Cluster every layer's surviving weights; pruned positions stay excluded
/// and zero never enters a codebook.
pub fn cluster(
    model: &CompressedModel,
    cfg: &ClusterConfig,
) -> Result<CompressedModel, CompressError> {
    cfg.validate()?;
    let mut layers = Vec::with_capacity(model.layers.len());
    for (i, layer) in model.layers.iter().enumerate() {
        let vals = match &layer.values {
            Values::F32(v) => v,
            Values::Clustered { .. } => {
                return Err(CompressError::InvalidComposition {
                    layer: i,
                    kind: "clustered",
                    op: "cluster",
                })
            }
            Values::Quantized(_) => {
                return Err(CompressError::InvalidComposition {
                    layer: i,
                    kind: "quantized",
                    op: "cluster",
                })
            }
        };
        if vals.is_empty() {
            return Err(CompressError::DegenerateLayer { layer: i });
        }
        let fit = kmeans_1d(vals, cfg.clusters, cfg.max_iters);
        layers.push(CompressedLayer::new(
            layer.rows,
            layer.cols,
            layer.pattern.clone(),
            Values::Clustered {
                codebook: Codebook::F32(fit.centroids),
                indices: fit.assignments,
            },
        ));
    }
    let mut provenance = model.provenance.clone();
    provenance.push(Stage::Cluster(cfg.clone()));
    Ok(CompressedModel::from_parts(
        model.arch.clone(),
        layers,
        model.biases.clone(),
        provenance,
    ))
}

/// Per-cluster sums of a dense gradient over the layer's member positions.
/// Returns `None` when the layer is not clustered.
pub fn codebook_gradient_sums(layer: &CompressedLayer, grad: &Matrix) -> Option<Vec<f32>> {
    let (codebook, indices) = match &layer.values {
        Values::Clustered { codebook, indices } => (codebook, indices),
        _ => return None,
    };
    let mut sums = vec![0.0f32; codebook.len()];
    match &layer.pattern {
        Pattern::Dense => {
            for (pos, &idx) in indices.iter().enumerate() {
                sums[idx as usize] += grad.data()[pos];
            }
        }
        Pattern::Csr { row_ptr, col_idx } => {
            for r in 0..layer.rows {
                for e in row_ptr[r] as usize..row_ptr[r + 1] as usize {
                    sums[indices[e] as usize] += grad.get(r, col_idx[e] as usize);
                }
            }
        }
    }
    Some(sums)
}

/// SGD parameters for codebook fine-tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneConfig {
    pub learning_rate: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub l2_penalty: f32,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 64,
            epochs: 3,
            l2_penalty: 1e-4,
            seed: 0,
        }
    }
}

/// Fine-tune the codebooks of a clustered model: each step computes dense
/// gradients on the reconstructed model, sums them per cluster, and moves
/// each centroid by `-lr * group_sum`. Assignments, biases, and unclustered
/// layers are left untouched.
pub fn cluster_finetune(
    model: &CompressedModel,
    data: &LabeledData,
    cfg: &FinetuneConfig,
) -> Result<CompressedModel, CompressError> {
    let clustered: Vec<usize> = model
        .layers
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l.values, Values::Clustered { .. }))
        .map(|(i, _)| i)
        .collect();
    if clustered.is_empty() {
        return Err(CompressError::BadConfig(
            "cluster_finetune requires at least one clustered layer".into(),
        ));
    }
    for &i in &clustered {
        if matches!(
            model.layers[i].values,
            Values::Clustered {
                codebook: Codebook::Quantized(_),
                ..
            }
        ) {
            return Err(CompressError::InvalidComposition {
                layer: i,
                kind: "quantized-codebook",
                op: "cluster_finetune",
            });
        }
    }

    let mut model = model.clone();
    if cfg.epochs == 0 {
        return Ok(model);
    }

    let mut rng = Rng::new(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch = gather(data, chunk);
            let dense = super::reconstruct(&model)?;
            let grads = backward(&dense, &batch, cfg.l2_penalty)?;
            for &i in &clustered {
                let sums = codebook_gradient_sums(&model.layers[i], &grads.layers[i].0)
                    .expect("layer is clustered");
                if let Values::Clustered {
                    codebook: Codebook::F32(cb),
                    ..
                } = &mut model.layers[i].values
                {
                    for (c, s) in cb.iter_mut().zip(&sums) {
                        *c -= cfg.learning_rate * s;
                    }
                }
            }
        }
    }
    Ok(model)
}

fn gather(data: &LabeledData, idx: &[usize]) -> LabeledData {
    let cols = data.inputs.cols();
    let mut rows = Vec::with_capacity(idx.len() * cols);
    let mut labels = Vec::with_capacity(idx.len());
    for &i in idx {
        rows.extend_from_slice(data.inputs.row(i));
        labels.push(data.labels[i]);
    }
    LabeledData::new(Matrix::from_vec(idx.len(), cols, rows).unwrap(), labels)
}
