//! Fully connected networks used as frozen generators and as trainable
//! autoencoder halves.
//!
//! Weights are stored row-major `out x in`; a layer computes
//! `act(W x + b)`. Batched evaluation stacks inputs as rows of a matrix.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::linalg::{matmul_nn, matmul_nt, matmul_tn_acc};
use crate::loss::LossKind;
use crate::tensor::{ImageShape, ImageTensor, LatentVector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Identity,
    Tanh,
}

/// Logistic function, split in two branches so `exp` never overflows.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative at pre-activation `x`.
    pub fn deriv(self, x: f64) -> f64 {
        self.deriv_from_output(self.apply(x))
    }

    /// Derivative expressed through the activation's output `y`.
    pub fn deriv_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Usage("layer dimensions must be positive".into()));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::Shape { context: "layer weights", expected: in_dim * out_dim, actual: weights.len() });
        }
        if bias.len() != out_dim {
            return Err(Error::Shape { context: "layer bias", expected: out_dim, actual: bias.len() });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        Ok(Self { in_dim, out_dim, weights, bias, activation })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self> {
        Self::new(in_dim, out_dim, vec![0.0; in_dim * out_dim], vec![0.0; out_dim], activation)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// `y (n x out) = act(x W^T + b)`.
    fn forward_rows(&self, x: &[f64], n: usize, y: &mut Vec<f64>) {
        y.resize(n * self.out_dim, 0.0);
        matmul_nt(n, self.in_dim, self.out_dim, x, &self.weights, y);
        for row in y.chunks_exact_mut(self.out_dim) {
            for (v, b) in row.iter_mut().zip(&self.bias) {
                *v = self.activation.apply(*v + b);
            }
        }
    }
}

/// Parameter gradients, shaped like the network they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub layers: Vec<LayerGradient>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl GradientBundle {
    pub fn zeros_for(gen: &MlpGenerator) -> Self {
        Self {
            layers: gen
                .layers
                .iter()
                .map(|l| LayerGradient { weights: vec![0.0; l.weights.len()], bias: vec![0.0; l.bias.len()] })
                .collect(),
        }
    }

    /// Flattened in the same order as [`MlpGenerator::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

/// Activations recorded by a batched forward pass: `acts[0]` is the input,
/// `acts[l + 1]` the output of layer `l`.
pub(crate) struct Tape {
    rows: usize,
    acts: Vec<Vec<f64>>,
}

impl Tape {
    pub(crate) fn output(&self) -> &[f64] {
        self.acts.last().expect("tape holds at least the input")
    }
}

/// A frozen fully connected generator `G: z -> image`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpGenerator {
    id: String,
    output_shape: ImageShape,
    layers: Vec<DenseLayer>,
}

impl MlpGenerator {
    pub fn new(id: impl Into<String>, layers: Vec<DenseLayer>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::Usage("a generator needs at least one layer".into()));
        };
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::Shape { context: "layer chain", expected: pair[0].out_dim, actual: pair[1].in_dim });
            }
        }
        let output_shape = ImageShape::infer(last.out_dim);
        Ok(Self { id: id.into(), output_shape, layers })
    }

    pub fn with_output_shape(mut self, shape: ImageShape) -> Result<Self> {
        if shape.len() != self.output_dim() {
            return Err(Error::Shape {
                context: "generator output shape",
                expected: self.output_dim(),
                actual: shape.len(),
            });
        }
        self.output_shape = shape;
        Ok(self)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn output_shape(&self) -> ImageShape {
        self.output_shape
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    /// Width of every layer boundary, input first.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(|l| l.out_dim)).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// All parameters, layer by layer, weights before bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape {
                context: "parameter vector",
                expected: self.param_count(),
                actual: params.len(),
            });
        }
        if let Some(i) = params.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {i}")));
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.weights.len());
            let (b, tail) = tail.split_at(l.bias.len());
            l.weights.copy_from_slice(w);
            l.bias.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    /// SHA-256 over the architecture and the little-endian parameter bytes.
    pub fn weight_hash(&self) -> String {
        let mut h = Sha256::new();
        for d in self.dims() {
            h.update((d as u64).to_le_bytes());
        }
        for l in &self.layers {
            h.update(l.activation.name().as_bytes());
            for v in l.weights.iter().chain(&l.bias) {
                h.update(v.to_le_bytes());
            }
        }
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The network `self` followed by `next`.
    pub fn compose(&self, next: &MlpGenerator) -> Result<MlpGenerator> {
        if self.output_dim() != next.input_dim() {
            return Err(Error::Shape { context: "composition", expected: self.output_dim(), actual: next.input_dim() });
        }
        let layers = self.layers.iter().chain(&next.layers).cloned().collect();
        Ok(MlpGenerator { id: format!("{}+{}", self.id, next.id), output_shape: next.output_shape, layers })
    }

    /// Split into the first `k` layers and the rest.
    pub fn split_at(&self, k: usize) -> Result<(MlpGenerator, MlpGenerator)> {
        if k == 0 || k >= self.layers.len() {
            return Err(Error::Usage(format!("cannot split a {}-layer network at {k}", self.layers.len())));
        }
        let head = MlpGenerator::new(format!("{}[..{k}]", self.id), self.layers[..k].to_vec())?;
        let tail = MlpGenerator::new(format!("{}[{k}..]", self.id), self.layers[k..].to_vec())?
            .with_output_shape(self.output_shape)?;
        Ok((head, tail))
    }

    fn check_input(&self, len: usize, rows: usize) -> Result<()> {
        if len != rows * self.input_dim() {
            return Err(Error::Shape { context: "generator input", expected: rows * self.input_dim(), actual: len });
        }
        Ok(())
    }

    pub(crate) fn forward_tape(&self, input: &[f64], rows: usize) -> Result<Tape> {
        self.check_input(input.len(), rows)?;
        let tape = self.tape_rows(input, rows);
        for (i, y) in tape.acts.iter().skip(1).enumerate() {
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("forward output of layer {i}")));
            }
        }
        Ok(tape)
    }

    /// Forward pass without shape or finiteness checks.
    fn tape_rows(&self, input: &[f64], rows: usize) -> Tape {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = Vec::new();
            layer.forward_rows(&acts[i], rows, &mut y);
            acts.push(y);
        }
        Tape { rows, acts }
    }

    /// Reverse-mode pass. `out_grad` is dL/d(output) for every row; returns
    /// dL/d(input) and, when `params` is given, accumulates dL/d(parameters)
    /// into it.
    pub(crate) fn backward(
        &self,
        tape: &Tape,
        out_grad: Vec<f64>,
        params: Option<&mut GradientBundle>,
    ) -> Result<Vec<f64>> {
        self.backward_rows(tape, out_grad, params, true)
    }

    fn backward_rows(
        &self,
        tape: &Tape,
        out_grad: Vec<f64>,
        mut params: Option<&mut GradientBundle>,
        check: bool,
    ) -> Result<Vec<f64>> {
        let n = tape.rows;
        let mut grad = out_grad;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let y = &tape.acts[i + 1];
            for (g, &yv) in grad.iter_mut().zip(y) {
                *g *= layer.activation.deriv_from_output(yv);
            }
            let x = &tape.acts[i];
            if let Some(bundle) = params.as_deref_mut() {
                let lg = &mut bundle.layers[i];
                matmul_tn_acc(layer.out_dim, n, layer.in_dim, &grad, x, &mut lg.weights);
                for row in grad.chunks_exact(layer.out_dim) {
                    for (b, g) in lg.bias.iter_mut().zip(row) {
                        *b += g;
                    }
                }
            }
            let mut next = vec![0.0; n * layer.in_dim];
            matmul_nn(n, layer.out_dim, layer.in_dim, &grad, &layer.weights, &mut next);
            if check && next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("backward gradient of layer {i}")));
            }
            grad = next;
        }
        Ok(grad)
    }

    /// Per-row reconstruction loss and latent gradient for `rows` stacked
    /// latents. Row `r` is compared against target `r / rows_per_target`.
    /// Non-finite values are passed through rather than reported, so one
    /// diverging row cannot abort the others.
    pub(crate) fn latent_loss_grad_rows(
        &self,
        z: &[f64],
        targets: &[f64],
        rows_per_target: usize,
        kind: LossKind,
        grads: &mut [f64],
        values: &mut [f64],
    ) {
        let rows = values.len();
        let out_dim = self.output_dim();
        debug_assert_eq!(z.len(), rows * self.input_dim());
        debug_assert_eq!(grads.len(), z.len());
        let tape = self.tape_rows(z, rows);
        let mut out_grad = vec![0.0; rows * out_dim];
        for (r, (o, g)) in tape.output().chunks_exact(out_dim).zip(out_grad.chunks_exact_mut(out_dim)).enumerate() {
            let t = r / rows_per_target;
            values[r] = kind.value_and_grad(o, &targets[t * out_dim..(t + 1) * out_dim], 1.0, g);
        }
        let g = self.backward_rows(&tape, out_grad, None, false).expect("unchecked pass");
        grads.copy_from_slice(&g);
    }

    /// Evaluate `rows` stacked inputs at once.
    pub fn forward_batch(&self, input: &[f64], rows: usize) -> Result<Vec<f64>> {
        let mut tape = self.forward_tape(input, rows)?;
        Ok(tape.acts.pop().expect("tape holds at least the input"))
    }

    /// Raw output vector `G(z)`.
    pub fn forward(&self, z: &LatentVector) -> Result<Vec<f64>> {
        if z.dim() != self.input_dim() {
            return Err(Error::Shape { context: "latent dimension", expected: self.input_dim(), actual: z.dim() });
        }
        self.forward_batch(z.as_slice(), 1)
    }

    /// `G(z)` as an image. Fails if the output leaves `[0, 1]`, which cannot
    /// happen with a sigmoid output layer.
    pub fn generate(&self, z: &LatentVector) -> Result<ImageTensor> {
        ImageTensor::new(self.output_shape, self.forward(z)?)
    }

    /// dL/dz given dL/d(output).
    pub fn grad_latent(&self, z: &LatentVector, output_grad: &[f64]) -> Result<LatentVector> {
        if z.dim() != self.input_dim() {
            return Err(Error::Shape { context: "latent dimension", expected: self.input_dim(), actual: z.dim() });
        }
        if output_grad.len() != self.output_dim() {
            return Err(Error::Shape {
                context: "output gradient",
                expected: self.output_dim(),
                actual: output_grad.len(),
            });
        }
        let tape = self.forward_tape(z.as_slice(), 1)?;
        LatentVector::new(self.backward(&tape, output_grad.to_vec(), None)?)
    }

    /// Batch-mean loss of `G(inputs)` against `targets` and its exact
    /// gradient with respect to every parameter.
    pub fn grad_params(
        &self,
        inputs: &[LatentVector],
        targets: &[ImageTensor],
        kind: LossKind,
    ) -> Result<(f64, GradientBundle)> {
        if inputs.is_empty() {
            return Err(Error::Usage("empty batch".into()));
        }
        if inputs.len() != targets.len() {
            return Err(Error::Consistency(format!("{} inputs but {} targets", inputs.len(), targets.len())));
        }
        let mut x = Vec::with_capacity(inputs.len() * self.input_dim());
        for z in inputs {
            if z.dim() != self.input_dim() {
                return Err(Error::Shape { context: "latent dimension", expected: self.input_dim(), actual: z.dim() });
            }
            x.extend_from_slice(z.as_slice());
        }
        let mut t = Vec::with_capacity(targets.len() * self.output_dim());
        for img in targets {
            if img.len() != self.output_dim() {
                return Err(Error::Shape { context: "target image", expected: self.output_dim(), actual: img.len() });
            }
            t.extend_from_slice(img.data());
        }
        self.batch_loss_grad(&x, &t, inputs.len(), kind)
    }

    /// Matrix form of [`grad_params`](Self::grad_params).
    pub(crate) fn batch_loss_grad(
        &self,
        inputs: &[f64],
        targets: &[f64],
        rows: usize,
        kind: LossKind,
    ) -> Result<(f64, GradientBundle)> {
        let tape = self.forward_tape(inputs, rows)?;
        let out_dim = self.output_dim();
        let mut out_grad = vec![0.0; rows * out_dim];
        let weight = 1.0 / rows as f64;
        let mut total = 0.0;
        for ((o, t), g) in tape
            .output()
            .chunks_exact(out_dim)
            .zip(targets.chunks_exact(out_dim))
            .zip(out_grad.chunks_exact_mut(out_dim))
        {
            total += kind.value_and_grad(o, t, weight, g);
        }
        let mut bundle = GradientBundle::zeros_for(self);
        self.backward(&tape, out_grad, Some(&mut bundle))?;
        Ok((total / rows as f64, bundle))
    }
}
