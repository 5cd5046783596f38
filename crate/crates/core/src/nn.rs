//! Feedforward classifier: construction, forward pass, cross-entropy loss,
//! backpropagation, and minibatch SGD.
//!
//! Activation schedule: ReLU after every hidden affine except the last one,
//! which applies no activation, and softmax after the output affine. For the
//! default architecture `52-64-256-128-256-128-64-2` that means ReLU after
//! hidden affines 1-5, nothing after hidden affine 6, softmax after the
//! 64->2 output map.
//!
//! Training is deterministic: the same model, data, and `TrainConfig.seed`
//! produce a bit-identical trained model.

use crate::linalg::{argmax, relu, softmax, Matrix, Rng, ShapeError, Vector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("architecture needs at least 2 layer sizes, got {0}")]
    ArchTooShort(usize),
    #[error("architecture layer {index} has zero width")]
    ZeroWidth { index: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("label {label} out of range for {classes} classes (sample {sample})")]
    LabelOutOfRange {
        label: usize,
        classes: usize,
        sample: usize,
    },
    #[error("invalid train config: {0}")]
    BadConfig(String),
}

/// Layer widths, input first and class count last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    layer_sizes: Vec<usize>,
}

/// The paper-style default: 52 inputs, six hidden layers, 2 classes.
pub const DEFAULT_LAYER_SIZES: [usize; 8] = [52, 64, 256, 128, 256, 128, 64, 2];

impl Architecture {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self, NnError> {
        if layer_sizes.len() < 2 {
            return Err(NnError::ArchTooShort(layer_sizes.len()));
        }
        if let Some(index) = layer_sizes.iter().position(|&s| s == 0) {
            return Err(NnError::ZeroWidth { index });
        }
        Ok(Self { layer_sizes })
    }

    /// The default fault-detector architecture.
    pub fn default_te() -> Self {
        Self {
            layer_sizes: DEFAULT_LAYER_SIZES.to_vec(),
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn class_count(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of affine maps (= layer_sizes.len() - 1).
    pub fn num_affine(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Total weights + biases.
    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

/// One affine map.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vector,
}

/// The trainable artifact: an ordered list of affine layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseModel {
    arch: Architecture,
    layers: Vec<DenseLayer>,
}

impl DenseModel {
    /// All-zero parameters.
    pub fn zeros(arch: Architecture) -> Self {
        let layers = arch
            .layer_sizes
            .windows(2)
            .map(|w| DenseLayer {
                weights: Matrix::zeros(w[1], w[0]),
                bias: Vector::zeros(w[1]),
            })
            .collect();
        Self { arch, layers }
    }

    /// He-uniform initialization (scaled by fan-in), zero biases.
    pub fn init_seeded(arch: Architecture, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let mut model = Self::zeros(arch);
        for layer in &mut model.layers {
            let fan_in = layer.weights.cols();
            let limit = (6.0 / fan_in.max(1) as f32).sqrt();
            for w in layer.weights.data_mut() {
                *w = rng.uniform(-limit, limit);
            }
        }
        model
    }

    /// Rebuild from parts; shapes must match the architecture.
    pub fn from_layers(arch: Architecture, layers: Vec<DenseLayer>) -> Result<Self, NnError> {
        let sizes = &arch.layer_sizes;
        if layers.len() != sizes.len() - 1 {
            return Err(NnError::ArchTooShort(layers.len() + 1));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.weights.rows() != sizes[i + 1]
                || layer.weights.cols() != sizes[i]
                || layer.bias.len() != sizes[i + 1]
            {
                return Err(ShapeError::DataLen {
                    rows: sizes[i + 1],
                    cols: sizes[i],
                    len: layer.weights.len(),
                }
                .into());
            }
        }
        Ok(Self { arch, layers })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.arch.param_count()
    }

    /// Class probabilities for one input.
    pub fn forward(&self, x: &Vector) -> Result<Vector, ShapeError> {
        let acts = self.forward_trace(x)?;
        Ok(acts.into_iter().last().unwrap())
    }

    /// Forward pass keeping every post-activation value; `out[0]` is the
    /// input, `out[last]` the class probabilities.
    fn forward_trace(&self, x: &Vector) -> Result<Vec<Vector>, ShapeError> {
        let n = self.layers.len();
        let mut acts = Vec::with_capacity(n + 1);
        acts.push(x.clone());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weights.matvec(acts.last().unwrap())?;
            z.add_assign(&layer.bias);
            let a = match activation_for(l, n) {
                Activation::Relu => relu(&z),
                Activation::Identity => z,
                Activation::Softmax => softmax(&z),
            };
            acts.push(a);
        }
        Ok(acts)
    }

    /// Sum of squared weights (biases excluded), for the L2 penalty.
    pub fn weight_norm_sq(&self) -> f64 {
        self.layers.iter().map(|l| l.weights.frobenius_sq()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Activation {
    Relu,
    Identity,
    Softmax,
}

/// Activation applied after affine `layer` of `count` total.
fn activation_for(layer: usize, count: usize) -> Activation {
    if layer + 1 == count {
        Activation::Softmax
    } else if layer + 2 == count {
        Activation::Identity
    } else {
        Activation::Relu
    }
}

/// A labeled sample set: one row of `inputs` per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
}

impl LabeledData {
    pub fn new(inputs: Matrix, labels: Vec<usize>) -> Self {
        assert_eq!(inputs.rows(), labels.len(), "one label per sample");
        Self { inputs, labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn sample(&self, i: usize) -> Vector {
        Vector::from_slice(self.inputs.row(i))
    }

    fn validate_for(&self, model: &DenseModel) -> Result<(), NnError> {
        if self.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        if self.inputs.cols() != model.arch.input_dim() {
            return Err(ShapeError::MatVec {
                rows: model.arch.layer_sizes[1],
                cols: model.arch.input_dim(),
                len: self.inputs.cols(),
            }
            .into());
        }
        let classes = model.arch.class_count();
        for (sample, &label) in self.labels.iter().enumerate() {
            if label >= classes {
                return Err(NnError::LabelOutOfRange {
                    label,
                    classes,
                    sample,
                });
            }
        }
        Ok(())
    }
}

/// SGD hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub l2_penalty: f32,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 64,
            epochs: 30,
            l2_penalty: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.learning_rate > 0.0) {
            return Err(NnError::BadConfig(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(NnError::BadConfig("batch_size must be >= 1".into()));
        }
        if self.l2_penalty < 0.0 {
            return Err(NnError::BadConfig(format!(
                "l2_penalty must be >= 0, got {}",
                self.l2_penalty
            )));
        }
        Ok(())
    }
}

/// Per-layer gradients, same shapes as the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Matrix, Vector)>,
}

impl Gradients {
    fn zeros_like(model: &DenseModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| {
                    (
                        Matrix::zeros(l.weights.rows(), l.weights.cols()),
                        Vector::zeros(l.bias.len()),
                    )
                })
                .collect(),
        }
    }
}

/// Mean negative log-likelihood plus `l2_penalty / 2 * sum(w^2)`.
pub fn loss(model: &DenseModel, data: &LabeledData, l2_penalty: f32) -> Result<f64, NnError> {
    data.validate_for(model)?;
    let mut nll = 0.0f64;
    for i in 0..data.len() {
        let p = model.forward(&data.sample(i))?;
        let py = p.data()[data.labels[i]] as f64;
        // Clamp to avoid -inf on a hard-zero probability.
        nll -= py.max(f64::MIN_POSITIVE).ln();
    }
    let penalty = 0.5 * l2_penalty as f64 * model.weight_norm_sq();
    Ok(nll / data.len() as f64 + penalty)
}

/// Gradient of [`loss`] with respect to every weight and bias.
pub fn backward(
    model: &DenseModel,
    data: &LabeledData,
    l2_penalty: f32,
) -> Result<Gradients, NnError> {
    data.validate_for(model)?;
    let n_layers = model.layers.len();
    let mut grads = Gradients::zeros_like(model);

    for i in 0..data.len() {
        let acts = model.forward_trace(&data.sample(i))?;
        // dL/dz for the output affine: p - onehot(y).
        let mut delta = acts[n_layers].clone();
        delta.data_mut()[data.labels[i]] -= 1.0;

        for l in (0..n_layers).rev() {
            let (gw, gb) = &mut grads.layers[l];
            let a_in = &acts[l];
            for (r, &d) in delta.data().iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut gw.data_mut()[r * a_in.len()..(r + 1) * a_in.len()];
                for (g, &a) in row.iter_mut().zip(a_in.data()) {
                    *g += d * a;
                }
            }
            gb.add_assign(&delta);

            if l > 0 {
                let mut back = model.layers[l].weights.matvec_transposed(&delta)?;
                // Activation feeding this affine: identity for the last
                // hidden affine, ReLU otherwise.
                if activation_for(l - 1, n_layers) == Activation::Relu {
                    for (b, &a) in back.data_mut().iter_mut().zip(acts[l].data()) {
                        if a <= 0.0 {
                            *b = 0.0;
                        }
                    }
                }
                delta = back;
            }
        }
    }

    let inv_n = 1.0 / data.len() as f32;
    for (l, (gw, gb)) in grads.layers.iter_mut().enumerate() {
        for (g, &w) in gw.data_mut().iter_mut().zip(model.layers[l].weights.data()) {
            *g = *g * inv_n + l2_penalty * w;
        }
        for g in gb.data_mut() {
            *g *= inv_n;
        }
    }
    Ok(grads)
}

/// A trained model plus the end-of-epoch loss trace.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: DenseModel,
    pub loss_history: Vec<f64>,
}

/// Minibatch SGD. The input model is untouched; the returned model is
/// bit-identical across runs with the same seed.
pub fn train(model: &DenseModel, data: &LabeledData, cfg: &TrainConfig) -> Result<TrainOutcome, NnError> {
    cfg.validate()?;
    data.validate_for(model)?;
    let mut model = model.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut rng = Rng::new(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();

    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = gather(data, chunk);
            let grads = backward(&model, &batch, cfg.l2_penalty)?;
            for (layer, (gw, gb)) in model.layers.iter_mut().zip(&grads.layers) {
                for (w, &g) in layer.weights.data_mut().iter_mut().zip(gw.data()) {
                    *w -= cfg.learning_rate * g;
                }
                for (b, &g) in layer.bias.data_mut().iter_mut().zip(gb.data()) {
                    *b -= cfg.learning_rate * g;
                }
            }
        }
        history.push(loss(&model, data, cfg.l2_penalty)?);
    }

    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
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

/// Percentage of samples whose argmax probability equals the label.
/// Argmax ties break toward the lowest class index.
pub fn accuracy(model: &DenseModel, data: &LabeledData) -> Result<f64, NnError> {
    data.validate_for(model)?;
    let mut hits = 0usize;
    for i in 0..data.len() {
        let p = model.forward(&data.sample(i))?;
        if argmax(&p) == data.labels[i] {
            hits += 1;
        }
    }
    Ok(100.0 * hits as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_232() -> DenseModel {
        // 2-3-2: one hidden affine (identity activation) + softmax output.
        let arch = Architecture::new(vec![2, 3, 2]).unwrap();
        let w1 = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let w2 = Matrix::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]]);
        DenseModel::from_layers(
            arch,
            vec![
                DenseLayer {
                    weights: w1,
                    bias: Vector::zeros(3),
                },
                DenseLayer {
                    weights: w2,
                    bias: Vector::zeros(2),
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn param_count_default_arch() {
        assert_eq!(Architecture::default_te().param_count(), 127_234);
    }

    #[test]
    fn forward_zero_model_is_uniform() {
        let model = DenseModel::zeros(Architecture::default_te());
        let x = Vector::from_vec(vec![0.3; 52]);
        let p = model.forward(&x).unwrap();
        assert_eq!(p.data(), &[0.5, 0.5]);
    }

    #[test]
    fn forward_hand_oracle_232() {
        // x = [1, 2] -> h = [1, 2, 3] -> z = [1, 3] -> softmax
        let model = toy_232();
        let p = model.forward(&Vector::from_slice(&[1.0, 2.0])).unwrap();
        let e2 = (2.0f64).exp();
        let expect = [1.0 / (1.0 + e2), e2 / (1.0 + e2)];
        assert!((p.data()[0] as f64 - expect[0]).abs() < 1e-6);
        assert!((p.data()[1] as f64 - expect[1]).abs() < 1e-6);
    }

    #[test]
    fn forward_sums_to_one_and_is_pure() {
        let mut rng = Rng::new(77);
        for i in 0..1000 {
            let arch = Architecture::new(vec![3, 5, 4, 2]).unwrap();
            let model = DenseModel::init_seeded(arch, i);
            let x = Vector::from_vec((0..3).map(|_| rng.normal()).collect());
            let p = model.forward(&x).unwrap();
            let sum: f32 = p.data().iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert_eq!(p, model.forward(&x).unwrap(), "forward must be pure");
        }
    }

    #[test]
    fn loss_uniform_model_is_ln2() {
        let model = DenseModel::zeros(Architecture::new(vec![4, 2]).unwrap());
        let data = LabeledData::new(Matrix::zeros(6, 4), vec![0, 1, 0, 1, 1, 0]);
        let l = loss(&model, &data, 0.0).unwrap();
        assert!((l - (2.0f64).ln()).abs() < 1e-7, "{l}");
    }

    #[test]
    fn loss_perfect_model_is_penalty_only() {
        // Huge logit gap drives p(true) to 1 exactly in f32.
        let arch = Architecture::new(vec![1, 2]).unwrap();
        let model = DenseModel::from_layers(
            arch,
            vec![DenseLayer {
                weights: Matrix::from_rows(&[&[50.0], &[-50.0]]),
                bias: Vector::zeros(2),
            }],
        )
        .unwrap();
        let data = LabeledData::new(Matrix::from_vec(1, 1, vec![1.0]).unwrap(), vec![0]);
        let penalty = 0.5 * (1e-4f32 as f64) * model.weight_norm_sq();
        let l = loss(&model, &data, 1e-4).unwrap();
        assert!((l - penalty).abs() < 1e-9, "{l} vs {penalty}");
    }

    #[test]
    fn loss_empty_batch_errors() {
        let model = DenseModel::zeros(Architecture::new(vec![2, 2]).unwrap());
        let data = LabeledData::new(Matrix::zeros(0, 2), vec![]);
        assert_eq!(loss(&model, &data, 0.0), Err(NnError::EmptyBatch));
    }

    /// f64 re-implementation of forward + loss, used as the independent
    /// oracle for loss and finite-difference gradient checks.
    fn loss_f64(model: &DenseModel, data: &LabeledData, l2: f64) -> f64 {
        let n_layers = model.layers().len();
        let mut nll = 0.0f64;
        for i in 0..data.len() {
            let mut a: Vec<f64> = data.inputs.row(i).iter().map(|&v| v as f64).collect();
            for (l, layer) in model.layers().iter().enumerate() {
                let rows = layer.weights.rows();
                let cols = layer.weights.cols();
                let mut z = vec![0.0f64; rows];
                for r in 0..rows {
                    let mut acc = layer.bias.data()[r] as f64;
                    for c in 0..cols {
                        acc += layer.weights.data()[r * cols + c] as f64 * a[c];
                    }
                    z[r] = acc;
                }
                a = if l + 1 == n_layers {
                    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
                    let s: f64 = exps.iter().sum();
                    exps.iter().map(|&e| e / s).collect()
                } else if l + 2 == n_layers {
                    z
                } else {
                    z.iter().map(|&v| v.max(0.0)).collect()
                };
            }
            nll -= a[data.labels[i]].ln();
        }
        let mut w2 = 0.0f64;
        for layer in model.layers() {
            w2 += layer.weights.frobenius_sq();
        }
        nll / data.len() as f64 + 0.5 * l2 * w2
    }

    fn random_data(rng: &mut Rng, n: usize, dim: usize, classes: usize) -> LabeledData {
        let inputs =
            Matrix::from_vec(n, dim, (0..n * dim).map(|_| rng.normal()).collect()).unwrap();
        let labels = (0..n).map(|_| rng.below(classes)).collect();
        LabeledData::new(inputs, labels)
    }

    #[test]
    fn loss_matches_f64_oracle() {
        let mut rng = Rng::new(21);
        for s in 0..10u64 {
            let model = DenseModel::init_seeded(Architecture::new(vec![2, 3, 2]).unwrap(), s);
            let data = random_data(&mut rng, 8, 2, 2);
            let ours = loss(&model, &data, 1e-3).unwrap();
            let oracle = loss_f64(&model, &data, 1e-3);
            assert!((ours - oracle).abs() < 1e-6, "{ours} vs {oracle}");
        }
    }

    fn gradient_check(arch: &[usize], seed: u64, l2: f32) {
        let model = DenseModel::init_seeded(Architecture::new(arch.to_vec()).unwrap(), seed);
        let mut rng = Rng::new(seed ^ 0xabcdef);
        let data = random_data(&mut rng, 5, arch[0], *arch.last().unwrap());
        let grads = backward(&model, &data, l2).unwrap();

        for l in 0..model.layers().len() {
            let n_w = model.layers()[l].weights.len();
            let n_b = model.layers()[l].bias.len();
            for p in 0..n_w + n_b {
                let read = |m: &DenseModel| {
                    if p < n_w {
                        m.layers()[l].weights.data()[p]
                    } else {
                        m.layers()[l].bias.data()[p - n_w]
                    }
                };
                let write = |m: &mut DenseModel, v: f32| {
                    if p < n_w {
                        m.layers_mut()[l].weights.data_mut()[p] = v;
                    } else {
                        m.layers_mut()[l].bias.data_mut()[p - n_w] = v;
                    }
                };
                let orig = read(&model);
                let eps = 1e-3f32;
                let mut plus = model.clone();
                write(&mut plus, orig + eps);
                let mut minus = model.clone();
                write(&mut minus, orig - eps);
                // Measured f32 step, evaluated through the f64 oracle.
                let h = (read(&plus) as f64) - (read(&minus) as f64);
                let fd = (loss_f64(&plus, &data, l2 as f64) - loss_f64(&minus, &data, l2 as f64)) / h;
                let got = if p < n_w {
                    grads.layers[l].0.data()[p] as f64
                } else {
                    grads.layers[l].1.data()[p - n_w] as f64
                };
                let tol = 1e-4f64.max(1e-2 * fd.abs().max(got.abs()));
                assert!(
                    (fd - got).abs() <= tol,
                    "layer {l} param {p}: fd {fd} vs backward {got}"
                );
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences_232() {
        for seed in 0..20 {
            gradient_check(&[2, 3, 2], seed, 1e-3);
        }
    }

    #[test]
    fn gradient_matches_finite_differences_relu_net() {
        // 2-4-3-2 exercises the ReLU derivative path.
        for seed in 0..5 {
            gradient_check(&[2, 4, 3, 2], seed, 1e-4);
        }
    }

    #[test]
    fn confident_correct_batch_has_tiny_output_gradient() {
        let arch = Architecture::new(vec![1, 2]).unwrap();
        let model = DenseModel::from_layers(
            arch,
            vec![DenseLayer {
                weights: Matrix::from_rows(&[&[50.0], &[-50.0]]),
                bias: Vector::zeros(2),
            }],
        )
        .unwrap();
        let data = LabeledData::new(Matrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap(), vec![0, 0]);
        let grads = backward(&model, &data, 0.0).unwrap();
        for g in grads.layers[0].0.data() {
            assert!(g.abs() < 1e-6);
        }
        for g in grads.layers[0].1.data() {
            assert!(g.abs() < 1e-6);
        }
    }

    #[test]
    fn duplicated_batch_keeps_mean_gradient() {
        let model = DenseModel::init_seeded(Architecture::new(vec![3, 4, 2]).unwrap(), 4);
        let mut rng = Rng::new(8);
        let data = random_data(&mut rng, 6, 3, 2);
        let mut doubled_rows = data.inputs.data().to_vec();
        doubled_rows.extend_from_slice(data.inputs.data());
        let mut doubled_labels = data.labels.clone();
        doubled_labels.extend_from_slice(&data.labels);
        let doubled = LabeledData::new(
            Matrix::from_vec(12, 3, doubled_rows).unwrap(),
            doubled_labels,
        );
        let g1 = backward(&model, &data, 1e-4).unwrap();
        let g2 = backward(&model, &doubled, 1e-4).unwrap();
        for ((a, _), (b, _)) in g1.layers.iter().zip(&g2.layers) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
    }

    fn separable_toy(n: usize, seed: u64) -> LabeledData {
        // Labels decided by sign of x0 + x1 with a margin.
        let mut rng = Rng::new(seed);
        let mut rows = Vec::with_capacity(n * 2);
        let mut labels = Vec::with_capacity(n);
        while labels.len() < n {
            let a = rng.uniform(-1.0, 1.0);
            let b = rng.uniform(-1.0, 1.0);
            if (a + b).abs() < 0.2 {
                continue;
            }
            rows.push(a);
            rows.push(b);
            labels.push(if a + b > 0.0 { 1 } else { 0 });
        }
        LabeledData::new(Matrix::from_vec(n, 2, rows).unwrap(), labels)
    }

    #[test]
    fn training_solves_linearly_separable_toy() {
        let data = separable_toy(200, 31);
        let model = DenseModel::init_seeded(Architecture::new(vec![2, 8, 4, 2]).unwrap(), 1);
        let cfg = TrainConfig {
            learning_rate: 0.1,
            batch_size: 16,
            epochs: 50,
            l2_penalty: 1e-5,
            seed: 7,
        };
        let out = train(&model, &data, &cfg).unwrap();
        assert!(accuracy(&out.model, &data).unwrap() >= 99.0);
    }

    #[test]
    fn zero_epochs_returns_model_unchanged() {
        let model = DenseModel::init_seeded(Architecture::new(vec![3, 4, 2]).unwrap(), 5);
        let mut rng = Rng::new(2);
        let data = random_data(&mut rng, 4, 3, 2);
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let out = train(&model, &data, &cfg).unwrap();
        assert_eq!(out.model, model);
        assert!(out.loss_history.is_empty());
    }

    #[test]
    fn equal_seeds_train_bit_identical() {
        let model = DenseModel::init_seeded(Architecture::new(vec![3, 6, 4, 2]).unwrap(), 5);
        let mut rng = Rng::new(2);
        let data = random_data(&mut rng, 32, 3, 2);
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let a = train(&model, &data, &cfg).unwrap();
        let b = train(&model, &data, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.loss_history, b.loss_history);
    }

    #[test]
    fn single_step_weight_change_scales_with_learning_rate() {
        let model = DenseModel::init_seeded(Architecture::new(vec![3, 4, 2]).unwrap(), 9);
        let mut rng = Rng::new(14);
        let data = random_data(&mut rng, 10, 3, 2);
        let delta_for = |lr: f32| {
            let cfg = TrainConfig {
                learning_rate: lr,
                batch_size: data.len(), // one full-batch step
                epochs: 1,
                l2_penalty: 0.0,
                seed: 3,
            };
            let out = train(&model, &data, &cfg).unwrap();
            let mut sq = 0.0f64;
            for (after, before) in out.model.layers().iter().zip(model.layers()) {
                for (a, b) in after.weights.data().iter().zip(before.weights.data()) {
                    sq += ((a - b) as f64).powi(2);
                }
            }
            sq.sqrt()
        };
        let d1 = delta_for(1e-3);
        let d2 = delta_for(1e-4);
        let ratio = d1 / d2;
        assert!((ratio - 10.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn full_batch_loss_decreases_on_convex_problem() {
        // Single affine layer + softmax = logistic regression (convex).
        let data = separable_toy(100, 77);
        let model = DenseModel::init_seeded(Architecture::new(vec![2, 2]).unwrap(), 3);
        let cfg = TrainConfig {
            learning_rate: 0.05,
            batch_size: data.len(),
            epochs: 30,
            l2_penalty: 0.0,
            seed: 0,
        };
        let out = train(&model, &data, &cfg).unwrap();
        for w in out.loss_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "loss went up: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn accuracy_zero_model_ties_toward_class_zero() {
        let model = DenseModel::zeros(Architecture::new(vec![2, 2]).unwrap());
        let data = LabeledData::new(Matrix::zeros(10, 2), vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
        // Uniform output, argmax -> class 0 -> half the labels match.
        assert_eq!(accuracy(&model, &data).unwrap(), 50.0);
    }

    #[test]
    fn accuracy_hand_counted_fixture() {
        // Model predicts class 1 iff x0 > 0.
        let arch = Architecture::new(vec![1, 2]).unwrap();
        let model = DenseModel::from_layers(
            arch,
            vec![DenseLayer {
                weights: Matrix::from_rows(&[&[-5.0], &[5.0]]),
                bias: Vector::zeros(2),
            }],
        )
        .unwrap();
        let xs = [0.5f32, -1.0, 2.0, -0.2, 1.0, 3.0, -4.0, 0.1, -0.6, 2.2];
        let ys = vec![1, 0, 1, 1, 1, 0, 0, 1, 0, 1];
        // Predictions: 1,0,1,0,1,1,0,1,0,1 -> mismatches at samples 3 and 5.
        let data = LabeledData::new(Matrix::from_vec(10, 1, xs.to_vec()).unwrap(), ys);
        assert_eq!(accuracy(&model, &data).unwrap(), 80.0);
    }

    #[test]
    fn perfect_model_scores_100() {
        let data = separable_toy(50, 5);
        let model = DenseModel::init_seeded(Architecture::new(vec![2, 8, 2]).unwrap(), 1);
        let cfg = TrainConfig {
            learning_rate: 0.1,
            batch_size: 10,
            epochs: 60,
            l2_penalty: 0.0,
            seed: 2,
        };
        let trained = train(&model, &data, &cfg).unwrap().model;
        assert_eq!(accuracy(&trained, &data).unwrap(), 100.0);
    }
}
