//! Bias-free ReLU networks built from dense, convolution, average-pooling,
//! ReLU and flatten layers, with from-scratch backpropagation.
//!
//! There are no bias terms anywhere. Together with average (not max) pooling
//! this keeps every network positively homogeneous layer by layer, which is
//! what lets [`crate::convert`] rescale weights without changing the argmax.

mod io;
pub mod kernels;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::tensor::Tensor;
use kernels::ConvGeometry;

pub use io::{load_model, save_model, LayerRecord, ModelDocument, NormalizationRecord, MODEL_VERSION};
pub use train::{evaluate, gradient_check, loss_and_grad, predict, train, EpochLog, Gradients, TrainConfig};

#[derive(Debug, Error)]
pub enum AnnError {
    #[error("shape mismatch at {context}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("empty batch")]
    EmptyBatch,
    #[error("loss became non-finite in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model file schema error: {0}")]
    Schema(String),
}

fn mismatch(context: impl Into<String>, expected: &[usize], found: &[usize]) -> AnnError {
    AnnError::ShapeMismatch {
        context: context.into(),
        expected: expected.to_vec(),
        found: found.to_vec(),
    }
}

/// One network stage.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// Weights `[out, in]`; input must be one-dimensional.
    Dense { weights: Tensor },
    /// Weights `[out_ch, in_ch, kh, kw]`, valid padding.
    Conv2d { weights: Tensor, stride: usize },
    AvgPool2d { size: usize },
    Relu,
    Flatten,
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense { .. } => "dense",
            Layer::Conv2d { .. } => "conv2d",
            Layer::AvgPool2d { .. } => "avgpool2d",
            Layer::Relu => "relu",
            Layer::Flatten => "flatten",
        }
    }

    pub fn weights(&self) -> Option<&Tensor> {
        match self {
            Layer::Dense { weights } | Layer::Conv2d { weights, .. } => Some(weights),
            _ => None,
        }
    }

    pub fn weights_mut(&mut self) -> Option<&mut Tensor> {
        match self {
            Layer::Dense { weights } | Layer::Conv2d { weights, .. } => Some(weights),
            _ => None,
        }
    }

    pub fn is_parameterized(&self) -> bool {
        self.weights().is_some()
    }

    /// Output shape for the given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, AnnError> {
        match self {
            Layer::Dense { weights } => {
                let ws = weights.shape();
                if ws.len() != 2 || input.len() != 1 || input[0] != ws[1] {
                    return Err(mismatch("dense input", &ws[1..], input));
                }
                Ok(vec![ws[0]])
            }
            Layer::Conv2d { weights, stride } => {
                let g = conv_geometry(weights, *stride, input)?;
                Ok(vec![g.out_ch, g.out_h(), g.out_w()])
            }
            Layer::AvgPool2d { size } => {
                if input.len() != 3 || *size == 0 || input[1] < *size || input[2] < *size {
                    return Err(mismatch("avgpool2d input", &[0, *size, *size], input));
                }
                Ok(vec![input[0], input[1] / size, input[2] / size])
            }
            Layer::Relu => Ok(input.to_vec()),
            Layer::Flatten => Ok(vec![input.iter().product()]),
        }
    }
}

pub(crate) fn conv_geometry(
    weights: &Tensor,
    stride: usize,
    input: &[usize],
) -> Result<ConvGeometry, AnnError> {
    let ws = weights.shape();
    if ws.len() != 4
        || input.len() != 3
        || input[0] != ws[1]
        || input[1] < ws[2]
        || input[2] < ws[3]
        || stride == 0
    {
        return Err(mismatch("conv2d input", &ws[1..], input));
    }
    Ok(ConvGeometry {
        in_ch: input[0],
        in_h: input[1],
        in_w: input[2],
        out_ch: ws[0],
        k_h: ws[2],
        k_w: ws[3],
        stride,
    })
}

/// An ordered layer stack with a fixed input shape.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnModel {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    // shapes[i] is the input shape of layer i; the last entry is the output shape.
    shapes: Vec<Vec<usize>>,
}

impl AnnModel {
    /// Builds a model, checking that adjacent layer shapes compose and all
    /// weights are finite.
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self, AnnError> {
        let mut shapes = vec![input_shape.clone()];
        for layer in &layers {
            if let Some(w) = layer.weights() {
                if !w.is_finite() {
                    return Err(AnnError::Schema(format!(
                        "non-finite weights in {} layer",
                        layer.kind()
                    )));
                }
            }
            let next = layer.output_shape(shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(Self {
            input_shape,
            layers,
            shapes,
        })
    }

    /// The reference LeNet-5-style classifier for `1x28x28` inputs:
    /// conv 6@5x5, relu, avgpool 2, conv 16@5x5, relu, avgpool 2, flatten,
    /// dense 120, relu, dense 84, relu, dense 10.
    pub fn lenet5(seed: u64) -> Self {
        let layers = vec![
            Layer::Conv2d {
                weights: Tensor::zeros(vec![6, 1, 5, 5]),
                stride: 1,
            },
            Layer::Relu,
            Layer::AvgPool2d { size: 2 },
            Layer::Conv2d {
                weights: Tensor::zeros(vec![16, 6, 5, 5]),
                stride: 1,
            },
            Layer::Relu,
            Layer::AvgPool2d { size: 2 },
            Layer::Flatten,
            Layer::Dense {
                weights: Tensor::zeros(vec![120, 256]),
            },
            Layer::Relu,
            Layer::Dense {
                weights: Tensor::zeros(vec![84, 120]),
            },
            Layer::Relu,
            Layer::Dense {
                weights: Tensor::zeros(vec![10, 84]),
            },
        ];
        let mut model = Self::new(vec![1, 28, 28], layers).expect("lenet5 shapes compose");
        model.init_uniform(seed);
        model
    }

    /// Re-draws every weight uniformly from `±sqrt(6 / (fan_in + fan_out))`.
    pub fn init_uniform(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut self.layers {
            let Some(w) = layer.weights_mut() else {
                continue;
            };
            let s = w.shape().to_vec();
            let (fan_in, fan_out) = match s.len() {
                2 => (s[1], s[0]),
                _ => (s[1] * s[2] * s[3], s[0] * s[2] * s[3]),
            };
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in w.data_mut() {
                *v = rng.gen_range(-bound..bound);
            }
        }
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().unwrap()
    }

    pub fn output_len(&self) -> usize {
        self.output_shape().iter().product()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Input shape of every layer, followed by the final output shape.
    pub fn layer_shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(Layer::weights)
            .map(Tensor::len)
            .sum()
    }

    /// Mutable access to the weights of layer `index`, if it has any.
    pub fn weights_mut(&mut self, index: usize) -> Option<&mut Tensor> {
        self.layers.get_mut(index).and_then(Layer::weights_mut)
    }

    fn check_input(&self, x: &[f64]) -> Result<(), AnnError> {
        if x.len() != self.input_len() {
            return Err(mismatch("model input", &self.input_shape, &[x.len()]));
        }
        Ok(())
    }

    /// Runs the network on a flat input and returns the flat output.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, AnnError> {
        Ok(self.forward_record(x)?.pop().unwrap())
    }

    /// Runs the network and returns every intermediate activation:
    /// entry 0 is the input, entry `i + 1` the output of layer `i`.
    pub fn forward_record(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, AnnError> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let input = acts.last().unwrap();
            let out = self.apply_layer(i, layer, input);
            acts.push(out);
        }
        Ok(acts)
    }

    /// Forward on a tensor whose shape must equal the model input shape.
    pub fn forward_tensor(&self, x: &Tensor) -> Result<Tensor, AnnError> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(mismatch("model input", &self.input_shape, x.shape()));
        }
        let out = self.forward(x.data())?;
        Ok(Tensor::new(self.output_shape().to_vec(), out))
    }

    fn apply_layer(&self, index: usize, layer: &Layer, input: &[f64]) -> Vec<f64> {
        let in_shape = &self.shapes[index];
        let out_len: usize = self.shapes[index + 1].iter().product();
        match layer {
            Layer::Dense { weights } => {
                let mut y = vec![0.0; out_len];
                kernels::dense_forward(weights.data(), out_len, input, &mut y);
                y
            }
            Layer::Conv2d { weights, stride } => {
                let g = conv_geometry(weights, *stride, in_shape).unwrap();
                let mut y = vec![0.0; out_len];
                kernels::conv_forward(&g, weights.data(), input, &mut y);
                y
            }
            Layer::AvgPool2d { size } => {
                let mut y = vec![0.0; out_len];
                kernels::avgpool_forward(
                    *size,
                    in_shape[0],
                    in_shape[1],
                    in_shape[2],
                    input,
                    &mut y,
                );
                y
            }
            Layer::Relu => input.iter().map(|&v| v.max(0.0)).collect(),
            Layer::Flatten => input.to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_dense_then_relu() {
        let mut eye = Tensor::zeros(vec![3, 3]);
        for i in 0..3 {
            eye.data_mut()[i * 3 + i] = 1.0;
        }
        let model = AnnModel::new(vec![3], vec![Layer::Dense { weights: eye }, Layer::Relu]).unwrap();
        assert_eq!(model.forward(&[1.0, 2.0, -3.0]).unwrap(), vec![1.0, 2.0, 0.0]);
    }

    #[test]
    fn avgpool_model() {
        let model = AnnModel::new(vec![1, 2, 2], vec![Layer::AvgPool2d { size: 2 }]).unwrap();
        assert_eq!(model.forward(&[1.0, 3.0, 5.0, 7.0]).unwrap(), vec![4.0]);
    }

    #[test]
    fn lenet_shapes() {
        let model = AnnModel::lenet5(0);
        assert_eq!(model.output_shape(), &[10]);
        assert_eq!(model.layer_shapes()[6], vec![16, 4, 4]);
        assert_eq!(model.parameter_count(), 150 + 2400 + 30720 + 10080 + 840);
    }

    #[test]
    fn shape_errors() {
        let bad = AnnModel::new(
            vec![4],
            vec![Layer::Dense {
                weights: Tensor::zeros(vec![2, 3]),
            }],
        );
        assert!(matches!(bad, Err(AnnError::ShapeMismatch { .. })));

        let model = AnnModel::lenet5(1);
        assert!(matches!(
            model.forward(&[0.0; 10]),
            Err(AnnError::ShapeMismatch { .. })
        ));
        assert!(model.forward_tensor(&Tensor::zeros(vec![28, 28])).is_err());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = AnnModel::lenet5(7);
        let b = AnnModel::lenet5(7);
        let c = AnnModel::lenet5(8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let bound = (6.0f64 / (25.0 + 150.0)).sqrt();
        let w = a.layers()[0].weights().unwrap();
        assert!(w.data().iter().all(|v| v.abs() < bound));
    }
}
