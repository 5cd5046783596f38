//! Post-training affine quantization. Per layer: `scale = (max - min) /
//! (2^bits - 1)` (1.0 when the layer is constant), codes round toward the
//! nearest level, and `value = min + code * scale` on the way back, so the
//! absolute reconstruction error never exceeds `scale / 2`.
//!
//! On a clustered layer only the codebook is quantized; the indices are
//! already small integers.

use super::{
    CompressError, Codebook, CompressedLayer, CompressedModel, QuantParams, QuantizedValues,
    Stage, Values,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantConfig {
    /// Code width in bits, 1..=16.
    pub bits: u8,
}

impl Default for QuantConfig {
    fn default() -> Self {
        Self { bits: 8 }
    }
}

impl QuantConfig {
    pub fn validate(&self) -> Result<(), CompressError> {
        if self.bits < 1 || self.bits > 16 {
            return Err(CompressError::BadConfig(format!(
                "quantization bits must be in 1..=16, got {}",
                self.bits
            )));
        }
        Ok(())
    }
}

pub(crate) fn quantize_values(vals: &[f32], bits: u8) -> QuantizedValues {
    debug_assert!(!vals.is_empty());
    let min = vals.iter().cloned().fold(f32::INFINITY, f32::min);
    let max = vals.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let steps = ((1u32 << bits) - 1) as f64;
    let scale = if max > min {
        (((max - min) as f64) / steps) as f32
    } else {
        1.0
    };
    // Codes are chosen against the stored f32 scale so the round trip is
    // consistent with what decode will compute.
    let inv = 1.0 / scale as f64;
    let codes = vals
        .iter()
        .map(|&v| {
            let q = ((v as f64 - min as f64) * inv).round();
            q.clamp(0.0, steps) as u32
        })
        .collect();
    QuantizedValues {
        params: QuantParams { bits, min, scale },
        codes,
    }
}

/// Quantize every layer: raw values become affine codes; clustered layers
/// get a quantized codebook instead.
pub fn quantize(
    model: &CompressedModel,
    cfg: &QuantConfig,
) -> Result<CompressedModel, CompressError> {
    cfg.validate()?;
    let mut layers = Vec::with_capacity(model.layers.len());
    for (i, layer) in model.layers.iter().enumerate() {
        let values = match &layer.values {
            Values::F32(vals) => {
                if vals.is_empty() {
                    return Err(CompressError::DegenerateLayer { layer: i });
                }
                Values::Quantized(quantize_values(vals, cfg.bits))
            }
            Values::Clustered {
                codebook: Codebook::F32(cb),
                indices,
            } => Values::Clustered {
                codebook: Codebook::Quantized(quantize_values(cb, cfg.bits)),
                indices: indices.clone(),
            },
            Values::Quantized(_) => {
                return Err(CompressError::InvalidComposition {
                    layer: i,
                    kind: "quantized",
                    op: "quantize",
                })
            }
            Values::Clustered {
                codebook: Codebook::Quantized(_),
                ..
            } => {
                return Err(CompressError::InvalidComposition {
                    layer: i,
                    kind: "quantized-codebook",
                    op: "quantize",
                })
            }
        };
        layers.push(CompressedLayer::new(
            layer.rows,
            layer.cols,
            layer.pattern.clone(),
            values,
        ));
    }
    let mut provenance = model.provenance.clone();
    provenance.push(Stage::Quantize(*cfg));
    Ok(CompressedModel::from_parts(
        model.arch.clone(),
        layers,
        model.biases.clone(),
        provenance,
    ))
}
