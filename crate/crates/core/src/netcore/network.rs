use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Activation;
use crate::error::{check_dim, Error, Result};

/// Batch-norm parameters of one layer, applied to the raw pre-activation as
/// `gamma * (z - mu) / sigma + beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnParams {
    pub mu: Array1<f64>,
    pub sigma: Array1<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    /// Lower clamp for batch standard deviations.
    pub epsilon: f64,
}

impl BnParams {
    pub const DEFAULT_EPSILON: f64 = 1e-5;

    /// Identity normalisation (`mu = 0`, `sigma = gamma = 1`, `beta = 0`).
    pub fn identity(width: usize) -> Self {
        BnParams {
            mu: Array1::zeros(width),
            sigma: Array1::ones(width),
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            epsilon: Self::DEFAULT_EPSILON,
        }
    }

    pub fn width(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        for (name, v) in [
            ("bn.mu", &self.mu),
            ("bn.sigma", &self.sigma),
            ("bn.gamma", &self.gamma),
            ("bn.beta", &self.beta),
        ] {
            if v.len() != width {
                return Err(Error::invalid(
                    "bn",
                    format!("{name} has length {} but layer width is {width}", v.len()),
                ));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("bn", format!("{name} has non-finite entries")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("bn.epsilon", "must be positive"));
        }
        if let Some(s) = self.sigma.iter().find(|&&s| s < self.epsilon) {
            return Err(Error::invalid(
                "bn.sigma",
                format!("entry {s} below epsilon {}", self.epsilon),
            ));
        }
        Ok(())
    }

    /// Eval-mode BN as an affine map `scale * z + shift`.
    pub fn fold(&self) -> (Array1<f64>, Array1<f64>) {
        let scale = &self.gamma / &self.sigma;
        let shift = &self.beta - &(&scale * &self.mu);
        (scale, shift)
    }
}

/// One dense layer: `a(BN(W x + b))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `D_out × D_in`; row `i` is the normal of neuron `i`'s hyperplane.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
    pub bn: Option<BnParams>,
}

impl Layer {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        let layer = Layer {
            weight,
            bias,
            activation,
            bn: None,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn with_bn(mut self, bn: BnParams) -> Result<Self> {
        bn.validate(self.out_dim())?;
        self.bn = Some(bn);
        Ok(self)
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.out_dim() == 0 || self.in_dim() == 0 {
            return Err(Error::invalid("layer", "dimensions must be at least 1"));
        }
        check_dim("layer bias", self.out_dim(), self.bias.len())?;
        self.activation.validate()?;
        if let Some(bn) = &self.bn {
            bn.validate(self.out_dim())?;
        }
        Ok(())
    }

    /// Number of trainable scalars (BN `gamma`/`beta` included).
    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len() + self.bn.as_ref().map_or(0, |bn| 2 * bn.width())
    }
}

/// A feed-forward stack of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("input_dim", "must be positive"));
        }
        if layers.is_empty() {
            return Err(Error::invalid("layers", "network needs at least one layer"));
        }
        let mut expected = input_dim;
        for layer in &layers {
            layer.validate()?;
            check_dim("layer input width", expected, layer.in_dim())?;
            expected = layer.out_dim();
        }
        Ok(Network { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::out_dim)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access for optimisers and tests. Callers must keep shapes
    /// intact; [`Network::new`] is the validating constructor.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Layer widths `[input, D_1, …, D_L]`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.layers.iter().map(Layer::out_dim))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Indices of the layers whose neurons are counted as non-linearities:
    /// every layer except a final Identity (logit) layer.
    pub fn probed_layers(&self) -> std::ops::Range<usize> {
        let last = self.layers.len() - 1;
        if self.layers[last].activation == Activation::Identity {
            0..last
        } else {
            0..last + 1
        }
    }

    /// Flat view over every parameter in a fixed order: per layer, weight
    /// (row-major), bias, then BN gamma and beta.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend(layer.weight.iter());
            out.extend(layer.bias.iter());
            if let Some(bn) = &layer.bn {
                out.extend(bn.gamma.iter());
                out.extend(bn.beta.iter());
            }
        }
        out
    }

    /// Mutable slices of every trainable tensor in [`Network::params`] order.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(layer.weight.as_slice_mut().expect("standard layout"));
            out.push(layer.bias.as_slice_mut().expect("standard layout"));
            if let Some(bn) = &mut layer.bn {
                out.push(bn.gamma.as_slice_mut().expect("standard layout"));
                out.push(bn.beta.as_slice_mut().expect("standard layout"));
            }
        }
        out
    }
}

/// Builds an MLP with widths `arch = [input, hidden…, output]`.
///
/// Weights and biases are drawn from `U[-1/sqrt(D_in), 1/sqrt(D_in)]` with a
/// ChaCha8 stream seeded by `seed`, then multiplied by `scale`. Hidden layers
/// use `activation`; the last layer is Identity (logits).
pub fn init(arch: &[usize], activation: Activation, seed: u64, scale: f64) -> Result<Network> {
    if arch.len() < 2 {
        return Err(Error::invalid("arch", "need at least input and output widths"));
    }
    if arch.contains(&0) {
        return Err(Error::invalid("arch", "widths must be positive"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid("scale", format!("{scale} must be positive")));
    }
    activation.validate()?;
    let mut rng = crate::seed::rng(seed);
    let mut layers = Vec::with_capacity(arch.len() - 1);
    for (k, pair) in arch.windows(2).enumerate() {
        let (d_in, d_out) = (pair[0], pair[1]);
        let bound = 1.0 / (d_in as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((d_out, d_in), || {
            rng.random_range(-bound..bound) * scale
        });
        let bias = Array1::from_shape_simple_fn(d_out, || rng.random_range(-bound..bound) * scale);
        let act = if k + 2 == arch.len() {
            Activation::Identity
        } else {
            activation
        };
        layers.push(Layer::new(weight, bias, act)?);
    }
    Network::new(arch[0], layers)
}
