//! The three compression transforms (pruning, weight clustering,
//! quantization) and their compositions.
//!
//! A [`CompressedModel`] stores each weight layer as a sparsity pattern
//! (dense or CSR) plus a value encoding (raw floats, affine integer codes,
//! or a codebook with per-position indices, where the codebook itself may be
//! quantized). The eight pattern/value combinations are the eight storage
//! kinds a layer can take. Biases are always kept dense: they are ~0.7% of
//! the parameters and pruning or coding them buys nothing.
//!
//! Every transform is a pure function: the input model is never mutated.

mod cluster;
mod pipeline;
mod prune;
mod quantize;

pub use cluster::{cluster, cluster_finetune, kmeans_1d, ClusterConfig, FinetuneConfig, KmeansFit};
pub use pipeline::{apply_pipeline, Pipeline, PipelineConfig, Stage};
pub use prune::{prune, PruneConfig, PruneMask};
pub use quantize::{quantize, QuantConfig};

use crate::linalg::{argmax, relu, softmax, Matrix, Vector};
use crate::nn::{Architecture, DenseLayer, DenseModel, LabeledData, NnError};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompressError {
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("layer {layer} has no surviving weights")]
    DegenerateLayer { layer: usize },
    #[error("layer {layer} is already {kind}; cannot apply {op}")]
    InvalidComposition {
        layer: usize,
        kind: &'static str,
        op: &'static str,
    },
    #[error("empty pipeline")]
    EmptyPipeline,
    #[error("pipeline stage '{0}' is not one of p, c, q")]
    UnknownStage(char),
    #[error("cluster fine-tuning needs training data")]
    MissingData,
    #[error("corrupt layer {layer}: {detail}")]
    Integrity { layer: usize, detail: String },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Which matrix positions hold stored values.
#[derive(Debug, Clone, PartialEq)]
pub enum Pattern {
    /// Every position is stored, row-major.
    Dense,
    /// CSR: `row_ptr` has rows+1 entries; `col_idx` holds the column of each
    /// stored value, ascending within a row.
    Csr { row_ptr: Vec<u32>, col_idx: Vec<u32> },
}

impl Pattern {
    pub fn nnz(&self, rows: usize, cols: usize) -> usize {
        match self {
            Pattern::Dense => rows * cols,
            Pattern::Csr { col_idx, .. } => {
                let _ = (rows, cols);
                col_idx.len()
            }
        }
    }
}

/// Per-layer affine quantization parameters: `value = min + code * scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantParams {
    pub bits: u8,
    pub min: f32,
    pub scale: f32,
}

impl QuantParams {
    pub fn levels(&self) -> u32 {
        1u32 << self.bits
    }

    #[inline]
    pub fn dequant(&self, code: u32) -> f32 {
        self.min + code as f32 * self.scale
    }
}

/// Integer codes under a [`QuantParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedValues {
    pub params: QuantParams,
    pub codes: Vec<u32>,
}

/// Shared-value codebook; either raw floats or quantized.
#[derive(Debug, Clone, PartialEq)]
pub enum Codebook {
    F32(Vec<f32>),
    Quantized(QuantizedValues),
}

impl Codebook {
    pub fn len(&self) -> usize {
        match self {
            Codebook::F32(v) => v.len(),
            Codebook::Quantized(q) => q.codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Value encoding for the stored positions of one layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    F32(Vec<f32>),
    Quantized(QuantizedValues),
    Clustered { codebook: Codebook, indices: Vec<u32> },
}

impl Values {
    pub fn len(&self) -> usize {
        match self {
            Values::F32(v) => v.len(),
            Values::Quantized(q) => q.codes.len(),
            Values::Clustered { indices, .. } => indices.len(),
        }
    }
}

/// The eight storage kinds a layer can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StorageKind {
    Dense,
    Sparse,
    Clustered,
    Quantized,
    SparseClustered,
    SparseQuantized,
    ClusteredQuantized,
    SparseClusteredQuantized,
}

impl StorageKind {
    pub fn name(self) -> &'static str {
        match self {
            StorageKind::Dense => "Dense",
            StorageKind::Sparse => "Sparse",
            StorageKind::Clustered => "Clustered",
            StorageKind::Quantized => "Quantized",
            StorageKind::SparseClustered => "SparseClustered",
            StorageKind::SparseQuantized => "SparseQuantized",
            StorageKind::ClusteredQuantized => "ClusteredQuantized",
            StorageKind::SparseClusteredQuantized => "SparseClusteredQuantized",
        }
    }
}

/// One weight layer in compressed form.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedLayer {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) pattern: Pattern,
    pub(crate) values: Values,
}

impl CompressedLayer {
    pub fn dense(matrix: &Matrix) -> Self {
        Self {
            rows: matrix.rows(),
            cols: matrix.cols(),
            pattern: Pattern::Dense,
            values: Values::F32(matrix.data().to_vec()),
        }
    }

    pub(crate) fn new(rows: usize, cols: usize, pattern: Pattern, values: Values) -> Self {
        debug_assert_eq!(pattern.nnz(rows, cols), values.len());
        Self {
            rows,
            cols,
            pattern,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn values(&self) -> &Values {
        &self.values
    }

    /// Stored-value count (all positions for dense patterns).
    pub fn nnz(&self) -> usize {
        self.pattern.nnz(self.rows, self.cols)
    }

    pub fn kind(&self) -> StorageKind {
        let sparse = matches!(self.pattern, Pattern::Csr { .. });
        match (&self.values, sparse) {
            (Values::F32(_), false) => StorageKind::Dense,
            (Values::F32(_), true) => StorageKind::Sparse,
            (Values::Quantized(_), false) => StorageKind::Quantized,
            (Values::Quantized(_), true) => StorageKind::SparseQuantized,
            (Values::Clustered { codebook: Codebook::F32(_), .. }, false) => StorageKind::Clustered,
            (Values::Clustered { codebook: Codebook::F32(_), .. }, true) => {
                StorageKind::SparseClustered
            }
            (Values::Clustered { codebook: Codebook::Quantized(_), .. }, false) => {
                StorageKind::ClusteredQuantized
            }
            (Values::Clustered { codebook: Codebook::Quantized(_), .. }, true) => {
                StorageKind::SparseClusteredQuantized
            }
        }
    }

    pub fn codebook_len(&self) -> Option<usize> {
        match &self.values {
            Values::Clustered { codebook, .. } => Some(codebook.len()),
            _ => None,
        }
    }

    fn validate_pattern(&self, layer: usize) -> Result<(), CompressError> {
        match &self.pattern {
            Pattern::Dense => {
                if self.values.len() != self.rows * self.cols {
                    return Err(CompressError::Integrity {
                        layer,
                        detail: format!(
                            "dense pattern expects {} values, found {}",
                            self.rows * self.cols,
                            self.values.len()
                        ),
                    });
                }
            }
            Pattern::Csr { row_ptr, col_idx } => {
                if row_ptr.len() != self.rows + 1 || row_ptr[0] != 0 {
                    return Err(CompressError::Integrity {
                        layer,
                        detail: "malformed CSR row pointers".into(),
                    });
                }
                if row_ptr.windows(2).any(|w| w[1] < w[0])
                    || *row_ptr.last().unwrap() as usize != col_idx.len()
                {
                    return Err(CompressError::Integrity {
                        layer,
                        detail: "CSR row pointers not monotone".into(),
                    });
                }
                for r in 0..self.rows {
                    let span = &col_idx[row_ptr[r] as usize..row_ptr[r + 1] as usize];
                    if span.windows(2).any(|w| w[1] <= w[0])
                        || span.iter().any(|&c| c as usize >= self.cols)
                    {
                        return Err(CompressError::Integrity {
                            layer,
                            detail: format!("CSR columns out of order or out of range in row {r}"),
                        });
                    }
                }
                if self.values.len() != col_idx.len() {
                    return Err(CompressError::Integrity {
                        layer,
                        detail: "value count does not match CSR pattern".into(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Materialize the stored values, in pattern order.
    pub(crate) fn resolve_values(&self, layer: usize) -> Result<Vec<f32>, CompressError> {
        self.validate_pattern(layer)?;
        match &self.values {
            Values::F32(v) => Ok(v.clone()),
            Values::Quantized(q) => dequant_all(q, layer),
            Values::Clustered { codebook, indices } => {
                let table = match codebook {
                    Codebook::F32(v) => v.clone(),
                    Codebook::Quantized(q) => dequant_all(q, layer)?,
                };
                let k = table.len();
                let mut out = Vec::with_capacity(indices.len());
                for &idx in indices {
                    if idx as usize >= k {
                        return Err(CompressError::Integrity {
                            layer,
                            detail: format!("codebook index {idx} >= k = {k}"),
                        });
                    }
                    out.push(table[idx as usize]);
                }
                Ok(out)
            }
        }
    }

    /// Dense matrix for this layer (pruned positions are zero).
    pub fn reconstruct(&self, layer: usize) -> Result<Matrix, CompressError> {
        let values = self.resolve_values(layer)?;
        match &self.pattern {
            Pattern::Dense => {
                Ok(Matrix::from_vec(self.rows, self.cols, values).expect("validated"))
            }
            Pattern::Csr { row_ptr, col_idx } => {
                let mut m = Matrix::zeros(self.rows, self.cols);
                for r in 0..self.rows {
                    for e in row_ptr[r] as usize..row_ptr[r + 1] as usize {
                        m.set(r, col_idx[e] as usize, values[e]);
                    }
                }
                Ok(m)
            }
        }
    }

    /// `y = W x` straight from the compressed representation.
    fn apply(&self, values: &[f32], x: &[f32], out: &mut [f32]) {
        match &self.pattern {
            Pattern::Dense => {
                for r in 0..self.rows {
                    let row = &values[r * self.cols..(r + 1) * self.cols];
                    let mut acc = 0.0f32;
                    for (w, &xv) in row.iter().zip(x) {
                        acc += w * xv;
                    }
                    out[r] = acc;
                }
            }
            Pattern::Csr { row_ptr, col_idx } => {
                for r in 0..self.rows {
                    let mut acc = 0.0f32;
                    for e in row_ptr[r] as usize..row_ptr[r + 1] as usize {
                        acc += values[e] * x[col_idx[e] as usize];
                    }
                    out[r] = acc;
                }
            }
        }
    }

    /// Squared reconstruction error against a dense reference.
    pub fn reconstruction_error_sq(&self, reference: &Matrix) -> Result<f64, CompressError> {
        let rec = self.reconstruct(0)?;
        Ok(rec
            .data()
            .iter()
            .zip(reference.data())
            .map(|(a, b)| ((a - b) as f64).powi(2))
            .sum())
    }
}

fn dequant_all(q: &QuantizedValues, layer: usize) -> Result<Vec<f32>, CompressError> {
    let levels = q.params.levels();
    let mut out = Vec::with_capacity(q.codes.len());
    for &code in &q.codes {
        if code >= levels {
            return Err(CompressError::Integrity {
                layer,
                detail: format!("code {code} >= 2^{} levels", q.params.bits),
            });
        }
        out.push(q.params.dequant(code));
    }
    Ok(out)
}

/// A model with per-layer compressed weight storage and dense biases.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedModel {
    pub(crate) arch: Architecture,
    pub(crate) layers: Vec<CompressedLayer>,
    pub(crate) biases: Vec<Vector>,
    pub(crate) provenance: Vec<Stage>,
}

impl CompressedModel {
    /// Wrap a dense model without changing any storage (all layers Dense).
    pub fn from_dense(model: &DenseModel) -> Self {
        Self {
            arch: model.arch().clone(),
            layers: model
                .layers()
                .iter()
                .map(|l| CompressedLayer::dense(&l.weights))
                .collect(),
            biases: model.layers().iter().map(|l| l.bias.clone()).collect(),
            provenance: Vec::new(),
        }
    }

    pub(crate) fn from_parts(
        arch: Architecture,
        layers: Vec<CompressedLayer>,
        biases: Vec<Vector>,
        provenance: Vec<Stage>,
    ) -> Self {
        Self {
            arch,
            layers,
            biases,
            provenance,
        }
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[CompressedLayer] {
        &self.layers
    }

    pub fn biases(&self) -> &[Vector] {
        &self.biases
    }

    pub fn provenance(&self) -> &[Stage] {
        &self.provenance
    }

    /// Class probabilities computed directly on the compressed storage,
    /// without materializing dense weight matrices.
    pub fn forward(&self, x: &Vector) -> Result<Vector, CompressError> {
        let resolved: Vec<Vec<f32>> = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| l.resolve_values(i))
            .collect::<Result<_, _>>()?;
        self.forward_resolved(&resolved, x)
    }

    fn forward_resolved(&self, resolved: &[Vec<f32>], x: &Vector) -> Result<Vector, CompressError> {
        let n = self.layers.len();
        if x.len() != self.arch.input_dim() {
            return Err(NnError::Shape(crate::linalg::ShapeError::MatVec {
                rows: self.layers[0].rows,
                cols: self.layers[0].cols,
                len: x.len(),
            })
            .into());
        }
        let mut a = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0f32; layer.rows];
            layer.apply(&resolved[l], a.data(), &mut z);
            let mut z = Vector::from_vec(z);
            z.add_assign(&self.biases[l]);
            a = if l + 1 == n {
                softmax(&z)
            } else if l + 2 == n {
                z
            } else {
                relu(&z)
            };
        }
        Ok(a)
    }

    /// Accuracy (%) via direct compressed inference; same tie rule as
    /// [`crate::nn::accuracy`].
    pub fn accuracy(&self, data: &LabeledData) -> Result<f64, CompressError> {
        if data.is_empty() {
            return Err(NnError::EmptyBatch.into());
        }
        let resolved: Vec<Vec<f32>> = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| l.resolve_values(i))
            .collect::<Result<_, _>>()?;
        let mut hits = 0usize;
        for i in 0..data.len() {
            let x = Vector::from_slice(data.inputs.row(i));
            let p = self.forward_resolved(&resolved, &x)?;
            if argmax(&p) == data.labels[i] {
                hits += 1;
            }
        }
        Ok(100.0 * hits as f64 / data.len() as f64)
    }
}

/// Rebuild the dense model: sparse mask, codebook lookup, and dequantization
/// composed as applicable.
pub fn reconstruct(model: &CompressedModel) -> Result<DenseModel, CompressError> {
    let mut layers = Vec::with_capacity(model.layers.len());
    for (i, layer) in model.layers.iter().enumerate() {
        layers.push(DenseLayer {
            weights: layer.reconstruct(i)?,
            bias: model.biases[i].clone(),
        });
    }
    Ok(DenseModel::from_layers(model.arch.clone(), layers)?)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::linalg::Rng;

    pub(crate) fn random_dense(arch: &[usize], seed: u64) -> DenseModel {
        DenseModel::init_seeded(Architecture::new(arch.to_vec()).unwrap(), seed)
    }

    #[test]
    fn from_dense_reconstructs_identically() {
        let model = random_dense(&[4, 6, 3], 9);
        let compressed = CompressedModel::from_dense(&model);
        assert_eq!(reconstruct(&compressed).unwrap(), model);
        for layer in compressed.layers() {
            assert_eq!(layer.kind(), StorageKind::Dense);
        }
    }

    #[test]
    fn corrupt_codebook_index_is_integrity_error() {
        let layer = CompressedLayer::new(
            1,
            2,
            Pattern::Dense,
            Values::Clustered {
                codebook: Codebook::F32(vec![1.0, 2.0]),
                indices: vec![0, 5],
            },
        );
        assert!(matches!(
            layer.reconstruct(0),
            Err(CompressError::Integrity { .. })
        ));
    }

    #[test]
    fn corrupt_quant_code_is_integrity_error() {
        let layer = CompressedLayer::new(
            1,
            2,
            Pattern::Dense,
            Values::Quantized(QuantizedValues {
                params: QuantParams {
                    bits: 2,
                    min: 0.0,
                    scale: 1.0,
                },
                codes: vec![0, 4],
            }),
        );
        assert!(matches!(
            layer.reconstruct(0),
            Err(CompressError::Integrity { .. })
        ));
    }

    #[test]
    fn dual_path_inference_matches_reconstructed_dense() {
        let model = random_dense(&[5, 8, 6, 2], 3);
        let cfg = PipelineConfig::default_with_seed(11);
        let mut rng = Rng::new(4);
        let data = LabeledData::new(
            Matrix::from_vec(16, 5, (0..80).map(|_| rng.normal()).collect()).unwrap(),
            (0..16).map(|_| rng.below(2)).collect(),
        );
        for tag in ["p", "c", "q", "pc", "pq", "cq", "pcq"] {
            let pipeline = Pipeline::parse(tag).unwrap();
            let compressed = apply_pipeline(&model, pipeline, &cfg, Some(&data)).unwrap();
            let dense = reconstruct(&compressed).unwrap();
            for i in 0..data.len() {
                let x = Vector::from_slice(data.inputs.row(i));
                let direct = compressed.forward(&x).unwrap();
                let via_dense = dense.forward(&x).unwrap();
                assert_eq!(direct, via_dense, "pipeline {tag} sample {i}");
            }
            assert_eq!(
                compressed.accuracy(&data).unwrap(),
                crate::nn::accuracy(&dense, &data).unwrap(),
                "pipeline {tag}"
            );
        }
    }
}
