//! Magnitude pruning: weights below a threshold are removed and the rest
//! are stored sparsely. Surviving values are kept bit-for-bit; biases are
//! never pruned.

use super::{CompressError, CompressedLayer, CompressedModel, Pattern, Stage, Values};
use crate::nn::DenseModel;

/// Pruning criterion: exactly one mode is active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PruneConfig {
    /// Remove every weight with `|w| < threshold` (exact zeros are always
    /// removed, since sparse storage has no reason to keep them).
    Threshold(f32),
    /// Remove the `floor(n * fraction)` smallest-magnitude weights of each
    /// layer; must be in `[0, 1)`.
    TargetSparsity(f32),
}

impl PruneConfig {
    pub fn validate(&self) -> Result<(), CompressError> {
        match *self {
            PruneConfig::Threshold(t) => {
                if !(t >= 0.0) || !t.is_finite() {
                    return Err(CompressError::BadConfig(format!(
                        "prune threshold must be finite and >= 0, got {t}"
                    )));
                }
            }
            PruneConfig::TargetSparsity(s) => {
                if !(0.0..1.0).contains(&s) {
                    return Err(CompressError::BadConfig(format!(
                        "target_sparsity must be in [0, 1), got {s} \
                         (1.0 would empty the network)"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Kept-position flags, row-major, one vec per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneMask {
    pub layers: Vec<Vec<bool>>,
}

impl PruneMask {
    pub fn kept_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.iter().filter(|&&k| k).count())
            .sum()
    }

    pub fn total(&self) -> usize {
        self.layers.iter().map(|l| l.len()).sum()
    }
}

/// Prune a dense model. Returns the sparse model and the kept-position mask.
pub fn prune(
    model: &DenseModel,
    cfg: &PruneConfig,
) -> Result<(CompressedModel, PruneMask), CompressError> {
    cfg.validate()?;
    let mut layers = Vec::with_capacity(model.layers().len());
    let mut mask_layers = Vec::with_capacity(model.layers().len());

    for layer in model.layers() {
        let w = layer.weights.data();
        let keep = match *cfg {
            PruneConfig::Threshold(t) => threshold_mask(w, t),
            PruneConfig::TargetSparsity(s) => sparsity_mask(w, s),
        };

        let rows = layer.weights.rows();
        let cols = layer.weights.cols();
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0u32);
        for r in 0..rows {
            for c in 0..cols {
                let pos = r * cols + c;
                if keep[pos] {
                    col_idx.push(c as u32);
                    values.push(w[pos]);
                }
            }
            row_ptr.push(col_idx.len() as u32);
        }

        layers.push(CompressedLayer::new(
            rows,
            cols,
            Pattern::Csr { row_ptr, col_idx },
            Values::F32(values),
        ));
        mask_layers.push(keep);
    }

    let compressed = CompressedModel::from_parts(
        model.arch().clone(),
        layers,
        model.layers().iter().map(|l| l.bias.clone()).collect(),
        vec![Stage::Prune(*cfg)],
    );
    Ok((compressed, PruneMask { layers: mask_layers }))
}

fn threshold_mask(w: &[f32], threshold: f32) -> Vec<bool> {
    w.iter()
        .map(|&v| v != 0.0 && v.abs() >= threshold)
        .collect()
}

fn sparsity_mask(w: &[f32], sparsity: f32) -> Vec<bool> {
    let n = w.len();
    let remove = (n as f64 * sparsity as f64).floor() as usize;
    let keep_n = n - remove;
    let mut order: Vec<usize> = (0..n).collect();
    // Largest magnitude first; ties broken by position for determinism.
    order.sort_by(|&a, &b| w[b].abs().total_cmp(&w[a].abs()).then(a.cmp(&b)));
    let mut keep = vec![false; n];
    for &pos in order.iter().take(keep_n) {
        // Exact zeros are never stored even when they rank inside the cut.
        if w[pos] != 0.0 {
            keep[pos] = true;
        }
    }
    keep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress::reconstruct;
    use crate::linalg::{Matrix, Rng, Vector};
    use crate::nn::{Architecture, DenseLayer};

    fn one_layer_model(weights: Matrix) -> DenseModel {
        let arch = Architecture::new(vec![weights.cols(), weights.rows()]).unwrap();
        let bias = Vector::zeros(weights.rows());
        DenseModel::from_layers(arch, vec![DenseLayer { weights, bias }]).unwrap()
    }

    #[test]
    fn figure_style_threshold_prune() {
        // 4x4 matrix, threshold 0.1: entries with |w| < 0.1 are removed,
        // the rest are untouched; reconstruction zeroes exactly those spots.
        let w = Matrix::from_rows(&[
            &[0.32, -0.05, 0.11, 0.02],
            &[-0.09, 0.46, -0.01, 0.88],
            &[0.07, -0.73, 0.10, -0.04],
            &[0.55, 0.03, -0.29, 0.64],
        ]);
        let model = one_layer_model(w.clone());
        let (compressed, mask) = prune(&model, &PruneConfig::Threshold(0.1)).unwrap();
        let rec = reconstruct(&compressed).unwrap();
        let got = &rec.layers()[0].weights;
        for r in 0..4 {
            for c in 0..4 {
                let orig = w.get(r, c);
                if orig.abs() < 0.1 {
                    assert_eq!(got.get(r, c), 0.0);
                    assert!(!mask.layers[0][r * 4 + c]);
                } else {
                    assert_eq!(got.get(r, c), orig, "kept weights are bit-equal");
                    assert!(mask.layers[0][r * 4 + c]);
                }
            }
        }
        assert_eq!(mask.kept_count(), 9);
    }

    #[test]
    fn threshold_zero_is_identity_on_nonzero_weights() {
        let model = crate::compress::tests::random_dense(&[6, 8, 3], 12);
        let (compressed, mask) = prune(&model, &PruneConfig::Threshold(0.0)).unwrap();
        assert_eq!(mask.kept_count(), mask.total());
        assert_eq!(reconstruct(&compressed).unwrap(), model);
    }

    #[test]
    fn exact_zeros_are_removed_even_at_threshold_zero() {
        let mut w = Matrix::zeros(2, 3);
        w.set(0, 1, 0.5);
        w.set(1, 2, -0.25);
        let model = one_layer_model(w.clone());
        let (compressed, mask) = prune(&model, &PruneConfig::Threshold(0.0)).unwrap();
        assert_eq!(mask.kept_count(), 2);
        assert_eq!(compressed.layers()[0].nnz(), 2);
        assert_eq!(
            reconstruct(&compressed).unwrap().layers()[0].weights,
            w,
            "zeros reconstruct as zeros"
        );
    }

    #[test]
    fn target_sparsity_keeps_largest_by_magnitude() {
        let mut rng = Rng::new(42);
        let data: Vec<f32> = (0..1000).map(|_| rng.normal()).collect();
        let model = one_layer_model(Matrix::from_vec(25, 40, data.clone()).unwrap());
        let (compressed, mask) = prune(&model, &PruneConfig::TargetSparsity(0.8)).unwrap();
        assert_eq!(mask.kept_count(), 200);
        assert_eq!(compressed.layers()[0].nnz(), 200);

        // Sort oracle: the 200 kept values are exactly the 200 largest.
        let mut sorted: Vec<f32> = data.iter().map(|v| v.abs()).collect();
        sorted.sort_by(f32::total_cmp);
        let cutoff = sorted[800];
        for (pos, &kept) in mask.layers[0].iter().enumerate() {
            if kept {
                assert!(data[pos].abs() >= cutoff);
            } else {
                assert!(data[pos].abs() <= cutoff);
            }
        }
    }

    #[test]
    fn threshold_semantics_are_exact() {
        let model = crate::compress::tests::random_dense(&[10, 12, 4], 7);
        let t = 0.05f32;
        let (_, mask) = prune(&model, &PruneConfig::Threshold(t)).unwrap();
        for (layer, keep) in model.layers().iter().zip(&mask.layers) {
            for (&w, &k) in layer.weights.data().iter().zip(keep) {
                if k {
                    assert!(w.abs() >= t);
                } else {
                    assert!(w.abs() < t || w == 0.0);
                }
            }
        }
    }

    #[test]
    fn full_sparsity_is_rejected() {
        let model = crate::compress::tests::random_dense(&[3, 2], 1);
        assert!(matches!(
            prune(&model, &PruneConfig::TargetSparsity(1.0)),
            Err(CompressError::BadConfig(_))
        ));
        assert!(PruneConfig::Threshold(-0.5).validate().is_err());
        assert!(PruneConfig::Threshold(f32::NAN).validate().is_err());
    }

    #[test]
    fn biases_are_never_pruned() {
        let arch = Architecture::new(vec![2, 2]).unwrap();
        let model = DenseModel::from_layers(
            arch,
            vec![DenseLayer {
                weights: Matrix::from_rows(&[&[0.01, 0.9], &[0.5, 0.002]]),
                bias: Vector::from_slice(&[0.001, -0.0004]),
            }],
        )
        .unwrap();
        let (compressed, _) = prune(&model, &PruneConfig::Threshold(0.1)).unwrap();
        assert_eq!(compressed.biases()[0].data(), &[0.001, -0.0004]);
    }
}
