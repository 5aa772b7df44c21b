//! The conv+MLP classifier and the MLP used alone for flat features.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::layers::{
    conv2d_backward_into, conv2d_forward, dense_backward_into, dense_forward, dropout, maxpool2x2, maxpool2x2_backward,
    relu, relu_backward, softmax,
};
use super::Tensor;
use crate::error::{Error, Result};

pub const CONV1_FILTERS: usize = 32;
pub const CONV2_FILTERS: usize = 16;
pub const KERNEL_SIZE: usize = 3;
pub const HIDDEN_UNITS: usize = 512;
pub const DROPOUT_RATE: f64 = 0.25;

/// RNG stream used for parameter initialization.
pub(crate) const INIT_STREAM: u64 = 0;

/// Architecture description; together with a seed it fully determines the
/// initial parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSpec {
    /// conv(32) → ReLU → pool → dropout → conv(16) → ReLU → pool → dropout
    /// → flatten → dense(512) → ReLU → dense(512) → ReLU → dense(classes).
    Cnn { in_bands: usize, height: usize, width: usize, n_classes: usize },
    /// dense(512) → ReLU → dense(512) → ReLU → dense(classes).
    Mlp { input_dim: usize, n_classes: usize },
    /// Dense layers with no activations; a smooth network for gradient
    /// checking.
    Linear { input_dim: usize, hidden: Vec<usize>, n_classes: usize },
    /// Full CNN topology with explicit widths, for small test networks.
    CnnCustom {
        in_bands: usize,
        height: usize,
        width: usize,
        conv_filters: [usize; 2],
        hidden: [usize; 2],
        n_classes: usize,
    },
}

impl ModelSpec {
    pub fn n_classes(&self) -> usize {
        match self {
            ModelSpec::Cnn { n_classes, .. }
            | ModelSpec::Mlp { n_classes, .. }
            | ModelSpec::Linear { n_classes, .. }
            | ModelSpec::CnnCustom { n_classes, .. } => *n_classes,
        }
    }

    pub fn input_shape(&self) -> Vec<usize> {
        match self {
            ModelSpec::Cnn { in_bands, height, width, .. } | ModelSpec::CnnCustom { in_bands, height, width, .. } => {
                vec![*in_bands, *height, *width]
            }
            ModelSpec::Mlp { input_dim, .. } | ModelSpec::Linear { input_dim, .. } => vec![*input_dim],
        }
    }
}

/// Flattened feature length after the two conv+pool stages.
///
/// 62×62 → 60 → 30 → 28 → 14, giving 14·14·16 = 3136; 32×32 → 576.
pub fn cnn_flat_dim(height: usize, width: usize, conv2_filters: usize) -> Result<usize> {
    let stage = |n: usize, axis: &str| -> Result<usize> {
        if n < KERNEL_SIZE {
            return Err(Error::invalid(format!(
                "{axis} of {n} is too small for a {KERNEL_SIZE}×{KERNEL_SIZE} convolution"
            )));
        }
        let conv = n - KERNEL_SIZE + 1;
        if conv < 2 {
            return Err(Error::invalid(format!("{axis} of {conv} after convolution is too small for 2×2 pooling")));
        }
        Ok(conv / 2)
    };
    let h = stage(stage(height, "height")?, "height")?;
    let w = stage(stage(width, "width")?, "width")?;
    Ok(h * w * conv2_filters)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv2d { name: String, weight: Tensor, bias: Tensor },
    Dense { name: String, weight: Tensor, bias: Tensor },
    Relu,
    MaxPool2x2,
    Dropout { rate: f64 },
    Flatten,
}

/// Per-layer values saved by the forward pass for backprop.
#[derive(Debug, Clone)]
enum Saved {
    Input(Tensor),
    Argmax { shape: Vec<usize>, argmax: Vec<usize> },
    Mask(Option<Vec<f64>>),
    Shape(Vec<usize>),
}

/// Record of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    saved: Vec<Saved>,
    pub logits: Vec<f64>,
}

impl Trace {
    /// ReLU on/off states and pooling winners; two passes with equal
    /// patterns lie in the same linear region of the network.
    pub fn activation_pattern(&self, layers: &[Layer]) -> Vec<usize> {
        let mut pattern = Vec::new();
        for (layer, saved) in layers.iter().zip(&self.saved) {
            match (layer, saved) {
                (Layer::Relu, Saved::Input(x)) => pattern.extend(x.data().iter().map(|&v| usize::from(v > 0.0))),
                (Layer::MaxPool2x2, Saved::Argmax { argmax, .. }) => pattern.extend(argmax),
                _ => {}
            }
        }
        pattern
    }
}

/// A sequential classifier network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: ModelSpec,
    pub layers: Vec<Layer>,
}

fn he_normal(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| normal.sample(rng)).collect()).expect("shape")
}

fn conv(name: &str, c_out: usize, c_in: usize, rng: &mut ChaCha8Rng) -> Layer {
    Layer::Conv2d {
        name: name.into(),
        weight: he_normal(&[c_out, c_in, KERNEL_SIZE, KERNEL_SIZE], c_in * KERNEL_SIZE * KERNEL_SIZE, rng),
        bias: Tensor::zeros(&[c_out]),
    }
}

fn dense(name: &str, n_out: usize, n_in: usize, rng: &mut ChaCha8Rng) -> Layer {
    Layer::Dense { name: name.into(), weight: he_normal(&[n_out, n_in], n_in, rng), bias: Tensor::zeros(&[n_out]) }
}

impl Network {
    /// Builds the architecture with He-normal weights and zero biases.
    pub fn build(spec: ModelSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(INIT_STREAM);
        if spec.n_classes() < 2 {
            return Err(Error::invalid("a classifier needs at least 2 classes"));
        }
        let layers = match &spec {
            ModelSpec::Cnn { in_bands, height, width, n_classes } => cnn_layers(
                *in_bands,
                *height,
                *width,
                [CONV1_FILTERS, CONV2_FILTERS],
                [HIDDEN_UNITS, HIDDEN_UNITS],
                *n_classes,
                &mut rng,
            )?,
            ModelSpec::CnnCustom { in_bands, height, width, conv_filters, hidden, n_classes } => {
                cnn_layers(*in_bands, *height, *width, *conv_filters, *hidden, *n_classes, &mut rng)?
            }
            ModelSpec::Mlp { input_dim, n_classes } => {
                if *input_dim == 0 {
                    return Err(Error::invalid("MLP input dimension must be positive"));
                }
                vec![
                    dense("dense1", HIDDEN_UNITS, *input_dim, &mut rng),
                    Layer::Relu,
                    dense("dense2", HIDDEN_UNITS, HIDDEN_UNITS, &mut rng),
                    Layer::Relu,
                    dense("output", *n_classes, HIDDEN_UNITS, &mut rng),
                ]
            }
            ModelSpec::Linear { input_dim, hidden, n_classes } => {
                let mut layers = Vec::new();
                let mut prev = *input_dim;
                for (i, &h) in hidden.iter().enumerate() {
                    layers.push(dense(&format!("dense{}", i + 1), h, prev, &mut rng));
                    prev = h;
                }
                layers.push(dense("output", *n_classes, prev, &mut rng));
                layers
            }
        };
        Ok(Self { spec, layers })
    }

    pub fn n_classes(&self) -> usize {
        self.spec.n_classes()
    }

    pub fn input_shape(&self) -> Vec<usize> {
        self.spec.input_shape()
    }

    /// Length of the vector entering the dense head (the CNN feature).
    pub fn flat_dim(&self) -> usize {
        self.layers
            .iter()
            .find_map(|l| match l {
                Layer::Dense { weight, .. } => Some(weight.shape()[1]),
                _ => None,
            })
            .unwrap_or(0)
    }

    /// Parameters in a fixed order: each conv/dense layer's weight then bias.
    pub fn parameters(&self) -> Vec<(&str, &Tensor)> {
        let mut out = Vec::new();
        for layer in &self.layers {
            if let Layer::Conv2d { name, weight, bias } | Layer::Dense { name, weight, bias } = layer {
                out.push((name.as_str(), weight));
                out.push((name.as_str(), bias));
            }
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            if let Layer::Conv2d { weight, bias, .. } | Layer::Dense { weight, bias, .. } = layer {
                out.push(weight);
                out.push(bias);
            }
        }
        out
    }

    /// `layer.weight` / `layer.bias` names matching [`Network::parameters`].
    pub fn parameter_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for layer in &self.layers {
            if let Layer::Conv2d { name, .. } | Layer::Dense { name, .. } = layer {
                out.push(format!("{name}.weight"));
                out.push(format!("{name}.bias"));
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|(_, t)| t.len()).sum()
    }

    /// Zero-filled gradient buffers aligned with [`Network::parameters`].
    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.parameters().iter().map(|(_, t)| Tensor::zeros(t.shape())).collect()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let expected = self.input_shape();
        if x.shape() != expected.as_slice() {
            return Err(Error::shape(format!("input {expected:?}"), format!("{:?}", x.shape())));
        }
        Ok(())
    }

    /// Forward pass. Dropout is active only when an RNG is supplied.
    pub fn forward(&self, x: &Tensor, mut dropout_rng: Option<&mut ChaCha8Rng>) -> Result<Trace> {
        self.check_input(x)?;
        let mut saved = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            h = match layer {
                Layer::Conv2d { weight, bias, .. } => {
                    let y = conv2d_forward(&h, weight, bias.data())?;
                    saved.push(Saved::Input(h));
                    y
                }
                Layer::Dense { weight, bias, .. } => {
                    let y = Tensor::from_vec(dense_forward(h.data(), weight, bias.data())?);
                    saved.push(Saved::Input(h));
                    y
                }
                Layer::Relu => {
                    let y = relu(&h);
                    saved.push(Saved::Input(h));
                    y
                }
                Layer::MaxPool2x2 => {
                    let (y, argmax) = maxpool2x2(&h)?;
                    saved.push(Saved::Argmax { shape: h.shape().to_vec(), argmax });
                    y
                }
                Layer::Dropout { rate } => match dropout_rng.as_deref_mut() {
                    Some(rng) => {
                        let (y, mask) = dropout(&h, *rate, rng, true)?;
                        saved.push(Saved::Mask(mask));
                        y
                    }
                    None => {
                        saved.push(Saved::Mask(None));
                        h
                    }
                },
                Layer::Flatten => {
                    saved.push(Saved::Shape(h.shape().to_vec()));
                    let n = h.len();
                    h.reshape(vec![n])?
                }
            };
        }
        Ok(Trace { saved, logits: h.into_data() })
    }

    /// Backprop from logit gradients, adding parameter gradients into
    /// `grads` (aligned with [`Network::parameters`]).
    pub fn backward(&self, trace: &Trace, grad_logits: &[f64], grads: &mut [Tensor]) -> Result<()> {
        let params = self.parameters();
        if grads.len() != params.len() || grads.iter().zip(&params).any(|(g, (_, p))| g.shape() != p.shape()) {
            return Err(Error::shape(
                format!("{} gradient tensors shaped like the parameters", params.len()),
                format!("{} tensors", grads.len()),
            ));
        }
        let mut g = Tensor::from_vec(grad_logits.to_vec());
        let mut slot = grads.len();
        for (idx, (layer, saved)) in self.layers.iter().zip(&trace.saved).enumerate().rev() {
            g = match (layer, saved) {
                (Layer::Conv2d { weight, .. }, Saved::Input(x)) => {
                    slot -= 2;
                    let (dw, db) = two_mut(grads, slot);
                    match conv2d_backward_into(x, weight, &g, dw.data_mut(), db.data_mut(), idx > 0)? {
                        Some(dx) => dx,
                        None => break,
                    }
                }
                (Layer::Dense { weight, .. }, Saved::Input(x)) => {
                    slot -= 2;
                    let (dw, db) = two_mut(grads, slot);
                    let dx = dense_backward_into(x.data(), weight, g.data(), dw.data_mut(), db.data_mut())?;
                    Tensor::new(x.shape().to_vec(), dx)?
                }
                (Layer::Relu, Saved::Input(x)) => relu_backward(&g, x)?,
                (Layer::MaxPool2x2, Saved::Argmax { shape, argmax }) => maxpool2x2_backward(&g, argmax, shape)?,
                (Layer::Dropout { .. }, Saved::Mask(mask)) => match mask {
                    Some(m) => {
                        let shape = g.shape().to_vec();
                        let data = g.data().iter().zip(m).map(|(a, b)| a * b).collect();
                        Tensor::new(shape, data)?
                    }
                    None => g,
                },
                (Layer::Flatten, Saved::Shape(shape)) => g.reshape(shape.clone())?,
                _ => return Err(Error::invalid("forward trace does not match the network")),
            };
        }
        Ok(())
    }

    /// Class probabilities with dropout inactive.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(softmax(&self.forward(x, None)?.logits))
    }
}

/// Weight and bias gradient slots of one layer.
fn two_mut(grads: &mut [Tensor], slot: usize) -> (&mut Tensor, &mut Tensor) {
    let (w, rest) = grads[slot..].split_first_mut().expect("weight slot");
    (w, &mut rest[0])
}

fn cnn_layers(
    in_bands: usize,
    height: usize,
    width: usize,
    filters: [usize; 2],
    hidden: [usize; 2],
    n_classes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Layer>> {
    if in_bands == 0 {
        return Err(Error::invalid("CNN needs at least one input band"));
    }
    let flat = cnn_flat_dim(height, width, filters[1])?;
    Ok(vec![
        conv("conv1", filters[0], in_bands, rng),
        Layer::Relu,
        Layer::MaxPool2x2,
        Layer::Dropout { rate: DROPOUT_RATE },
        conv("conv2", filters[1], filters[0], rng),
        Layer::Relu,
        Layer::MaxPool2x2,
        Layer::Dropout { rate: DROPOUT_RATE },
        Layer::Flatten,
        dense("dense1", hidden[0], flat, rng),
        Layer::Relu,
        dense("dense2", hidden[1], hidden[0], rng),
        Layer::Relu,
        dense("output", n_classes, hidden[1], rng),
    ])
}
