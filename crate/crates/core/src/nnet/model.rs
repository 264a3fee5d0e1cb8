use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Prng, Stream};

/// One affine layer. `weights` has shape `(in_dim, out_dim)` so that a batch
/// of row vectors maps as `x · W + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { weights: Array2::zeros((in_dim, out_dim)), bias: Array1::zeros(out_dim) }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.ncols()
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

/// Feed-forward network: rectifier on every hidden layer, identity on the
/// output layer, which produces raw class logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Dense>", into = "Vec<Dense>")]
pub struct MlpModel {
    layers: Vec<Dense>,
}

impl TryFrom<Vec<Dense>> for MlpModel {
    type Error = Error;

    fn try_from(layers: Vec<Dense>) -> Result<Self> {
        Self::from_layers(layers)
    }
}

impl From<MlpModel> for Vec<Dense> {
    fn from(model: MlpModel) -> Self {
        model.layers
    }
}

/// Activations recorded by a forward pass, consumed by backprop.
///
/// `inputs[l]` is the input to layer `l` (the batch itself for `l = 0`, the
/// rectified hidden activation afterwards).
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub(crate) inputs: Vec<Array2<f64>>,
    pub logits: Array2<f64>,
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::Validation(format!(
            "an MLP needs at least input and output dims, got {layer_dims:?}"
        )));
    }
    if layer_dims.contains(&0) {
        return Err(Error::Validation(format!("layer dims must be positive, got {layer_dims:?}")));
    }
    let classes = *layer_dims.last().unwrap();
    if classes < 2 {
        return Err(Error::Validation(format!(
            "output dimension must be a class count >= 2, got {classes}"
        )));
    }
    Ok(())
}

impl MlpModel {
    /// Validate and wrap a stack of layers.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Validation("model has no layers".into()));
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::Shape {
                    context: "layer bias length",
                    expected: layer.out_dim(),
                    found: layer.bias.len(),
                });
            }
            if l > 0 && layers[l - 1].out_dim() != layer.in_dim() {
                return Err(Error::Shape {
                    context: "layer chaining",
                    expected: layers[l - 1].out_dim(),
                    found: layer.in_dim(),
                });
            }
            if !layer.is_finite() {
                return Err(Error::Validation(format!("layer {l} has non-finite parameters")));
            }
        }
        let mut dims = vec![layers[0].in_dim()];
        dims.extend(layers.iter().map(Dense::out_dim));
        check_dims(&dims)?;
        Ok(Self { layers })
    }

    /// All-zero parameters.
    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        check_dims(layer_dims)?;
        let layers = layer_dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Self { layers })
    }

    /// He initialisation: weights ~ N(0, 2 / fan_in), biases zero. Weights
    /// are drawn layer by layer in row-major order.
    pub fn init(layer_dims: &[usize], rng: &mut Prng) -> Result<Self> {
        let mut model = Self::zeros(layer_dims)?;
        for layer in &mut model.layers {
            let std = (2.0 / layer.in_dim() as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("std is positive and finite");
            for w in layer.weights.iter_mut() {
                *w = normal.sample(rng);
            }
        }
        Ok(model)
    }

    /// [`MlpModel::init`] on the init stream of `seed`.
    pub fn seeded(layer_dims: &[usize], seed: u64) -> Result<Self> {
        Self::init(layer_dims, &mut rng::stream(seed, Stream::Init))
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(Dense::out_dim));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn class_count(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Dense::is_finite)
    }

    fn check_inputs(&self, inputs: &ArrayView2<f64>) -> Result<()> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::Shape {
                context: "forward input width",
                expected: self.input_dim(),
                found: inputs.ncols(),
            });
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("forward inputs contain non-finite values".into()));
        }
        Ok(())
    }

    /// Raw logits, one row per input row.
    pub fn forward(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_inputs(&inputs)?;
        Ok(self.forward_unchecked(inputs).logits)
    }

    pub fn forward_cached(&self, inputs: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_inputs(&inputs)?;
        Ok(self.forward_unchecked(inputs))
    }

    pub(crate) fn forward_unchecked(&self, inputs: ArrayView2<f64>) -> ForwardCache {
        let last = self.layers.len() - 1;
        let mut cached = Vec::with_capacity(self.layers.len());
        let mut current = inputs.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut h = current.dot(&layer.weights);
            h += &layer.bias;
            if l < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
            cached.push(current);
            current = h;
        }
        ForwardCache { inputs: cached, logits: current }
    }

    /// Backpropagate `logit_grad` (dL/dlogits, one row per sample) through
    /// the cached forward pass.
    pub fn backward(&self, cache: &ForwardCache, logit_grad: &Array2<f64>) -> Result<Gradients> {
        if logit_grad.dim() != cache.logits.dim() {
            return Err(Error::Shape {
                context: "logit gradient rows",
                expected: cache.logits.nrows(),
                found: logit_grad.nrows(),
            });
        }
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut delta = logit_grad.clone();
        for l in (0..self.layers.len()).rev() {
            let input = &cache.inputs[l];
            let weights = input.t().dot(&delta);
            let bias = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut prev = delta.dot(&self.layers[l].weights.t());
                // rectifier mask: the stored input is relu(h), positive exactly where h > 0
                prev.zip_mut_with(input, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = prev;
            }
            grads.push(Dense { weights, bias });
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }
}

/// Parameter gradients, one [`Dense`] per model layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            layers: model.layers().iter().map(|l| Dense::zeros(l.in_dim(), l.out_dim())).collect(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}
