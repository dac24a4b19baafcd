use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{conv_geometry, kernels, mismatch, AnnError, AnnModel, Layer};
use crate::mnist::Dataset;
use crate::tensor::argmax;

/// Per-layer weight gradients; empty vectors for layers without weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub per_layer: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(model: &AnnModel) -> Self {
        Self {
            per_layer: model
                .layers()
                .iter()
                .map(|l| vec![0.0; l.weights().map_or(0, |w| w.len())])
                .collect(),
        }
    }

    fn scale(&mut self, factor: f64) {
        for g in &mut self.per_layer {
            g.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2,
            batch_size: 32,
            learning_rate: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's samples, measured before each update.
    pub loss: f64,
    /// Training accuracy over the same forward passes.
    pub accuracy: f64,
}

fn softmax_xent(logits: &[f64], label: usize, grad: &mut [f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (g, &z) in grad.iter_mut().zip(logits) {
        *g = (z - max).exp();
        sum += *g;
    }
    for g in grad.iter_mut() {
        *g /= sum;
    }
    let loss = -(grad[label].ln());
    grad[label] -= 1.0;
    loss
}

/// Backpropagates `grad_out` through recorded activations, accumulating into `grads`.
fn backward(model: &AnnModel, acts: &[Vec<f64>], grad_out: Vec<f64>, grads: &mut Gradients) {
    let shapes = model.layer_shapes();
    let mut gy = grad_out;
    for (i, layer) in model.layers().iter().enumerate().rev() {
        let x = &acts[i];
        let need_gx = i > 0;
        let mut gx = vec![0.0; if need_gx { x.len() } else { 0 }];
        match layer {
            Layer::Dense { weights } => {
                let gx = need_gx.then_some(gx.as_mut_slice());
                kernels::dense_backward(weights.data(), x, &gy, &mut grads.per_layer[i], gx);
            }
            Layer::Conv2d { weights, stride } => {
                let g = conv_geometry(weights, *stride, &shapes[i]).unwrap();
                let gx = need_gx.then_some(gx.as_mut_slice());
                kernels::conv_backward(&g, weights.data(), x, &gy, &mut grads.per_layer[i], gx);
            }
            Layer::AvgPool2d { size } => {
                if need_gx {
                    let s = &shapes[i];
                    kernels::avgpool_backward(*size, s[0], s[1], s[2], &gy, &mut gx);
                }
            }
            Layer::Relu => {
                if need_gx {
                    for ((g, &y), &dy) in gx.iter_mut().zip(&acts[i + 1]).zip(&gy) {
                        *g = if y > 0.0 { dy } else { 0.0 };
                    }
                }
            }
            Layer::Flatten => {
                if need_gx {
                    gx.copy_from_slice(&gy);
                }
            }
        }
        gy = gx;
    }
}

struct BatchResult {
    loss_sum: f64,
    correct: usize,
    grads: Gradients,
}

fn batch_step(
    model: &AnnModel,
    inputs: &[&[f64]],
    labels: &[u8],
) -> Result<BatchResult, AnnError> {
    if inputs.is_empty() {
        return Err(AnnError::EmptyBatch);
    }
    if inputs.len() != labels.len() {
        return Err(mismatch("batch labels", &[inputs.len()], &[labels.len()]));
    }
    let n_out = model.output_len();
    let mut grads = Gradients::zeros_like(model);
    let mut loss_sum = 0.0;
    let mut correct = 0;
    // Samples are reduced strictly in batch order.
    for (x, &label) in inputs.iter().zip(labels) {
        let label = usize::from(label);
        if label >= n_out {
            return Err(mismatch("label", &[n_out], &[label]));
        }
        let acts = model.forward_record(x)?;
        let logits = acts.last().unwrap();
        if argmax(logits) == label {
            correct += 1;
        }
        let mut g = vec![0.0; n_out];
        loss_sum += softmax_xent(logits, label, &mut g);
        backward(model, &acts, g, &mut grads);
    }
    Ok(BatchResult {
        loss_sum,
        correct,
        grads,
    })
}

/// Mean softmax cross-entropy over the batch and its gradient with respect
/// to every weight.
pub fn loss_and_grad(
    model: &AnnModel,
    inputs: &[&[f64]],
    labels: &[u8],
) -> Result<(f64, Gradients), AnnError> {
    let mut r = batch_step(model, inputs, labels)?;
    let inv = 1.0 / inputs.len() as f64;
    r.grads.scale(inv);
    Ok((r.loss_sum * inv, r.grads))
}

/// Plain minibatch SGD. The sample order is reshuffled every epoch from a
/// generator seeded once with `cfg.seed`, so the result depends only on the
/// seed, the data and the starting weights.
pub fn train(
    model: &mut AnnModel,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<Vec<EpochLog>, AnnError> {
    if cfg.epochs == 0 {
        return Err(AnnError::InvalidHyperparameter("epochs must be >= 1".into()));
    }
    if cfg.batch_size == 0 {
        return Err(AnnError::InvalidHyperparameter("batch size must be >= 1".into()));
    }
    if !(cfg.learning_rate >= 0.0 && cfg.learning_rate.is_finite()) {
        return Err(AnnError::InvalidHyperparameter(format!(
            "learning rate {} must be finite and non-negative",
            cfg.learning_rate
        )));
    }
    if data.is_empty() {
        return Err(AnnError::EmptyBatch);
    }
    if data.image_len() != model.input_len() {
        return Err(mismatch("dataset images", model.input_shape(), data.image_shape()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut logs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let inputs: Vec<&[f64]> = chunk.iter().map(|&i| data.image(i)).collect();
            let labels: Vec<u8> = chunk.iter().map(|&i| data.labels()[i]).collect();
            let r = batch_step(model, &inputs, &labels)?;
            if !r.loss_sum.is_finite() {
                return Err(AnnError::NonFiniteLoss { epoch, batch: b });
            }
            loss_sum += r.loss_sum;
            correct += r.correct;
            let step = cfg.learning_rate / chunk.len() as f64;
            for (i, g) in r.grads.per_layer.iter().enumerate() {
                if let Some(w) = model.weights_mut(i) {
                    for (wv, gv) in w.data_mut().iter_mut().zip(g) {
                        *wv -= step * gv;
                    }
                }
            }
        }
        logs.push(EpochLog {
            epoch,
            loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
        });
    }
    Ok(logs)
}

/// Predicted class (argmax, ties to the smaller index) for every image.
pub fn predict(model: &AnnModel, data: &Dataset) -> Result<Vec<usize>, AnnError> {
    if data.image_len() != model.input_len() {
        return Err(mismatch("dataset images", model.input_shape(), data.image_shape()));
    }
    (0..data.len())
        .into_par_iter()
        .map(|i| model.forward(data.image(i)).map(|out| argmax(&out)))
        .collect()
}

/// Fraction of misclassified images.
pub fn evaluate(model: &AnnModel, data: &Dataset) -> Result<f64, AnnError> {
    if data.is_empty() {
        return Err(AnnError::EmptyBatch);
    }
    let wrong = predict(model, data)?
        .iter()
        .zip(data.labels())
        .filter(|(&p, &l)| p != usize::from(l))
        .count();
    Ok(wrong as f64 / data.len() as f64)
}

/// Relative error `|g - g_fd| / (|g| + |g_fd|)` between the analytic
/// gradient and central differences with step `h`, over all weights.
pub fn gradient_check(
    model: &AnnModel,
    inputs: &[&[f64]],
    labels: &[u8],
    h: f64,
) -> Result<f64, AnnError> {
    let (_, grads) = loss_and_grad(model, inputs, labels)?;
    let mut probe = model.clone();
    let (mut diff, mut norm_a, mut norm_n) = (0.0, 0.0, 0.0);
    for (layer, analytic) in grads.per_layer.iter().enumerate() {
        for (k, &a) in analytic.iter().enumerate() {
            let w0 = model.layers()[layer].weights().expect("weighted layer").data()[k];
            let mut loss_at = |w: f64| -> Result<f64, AnnError> {
                probe.weights_mut(layer).expect("weighted layer").data_mut()[k] = w;
                Ok(loss_and_grad(&probe, inputs, labels)?.0)
            };
            let numeric = (loss_at(w0 + h)? - loss_at(w0 - h)?) / (2.0 * h);
            loss_at(w0)?;
            diff += (a - numeric).powi(2);
            norm_a += a * a;
            norm_n += numeric * numeric;
        }
    }
    let scale = norm_a.sqrt() + norm_n.sqrt();
    Ok(if scale == 0.0 { 0.0 } else { diff.sqrt() / scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn zero_model() -> AnnModel {
        AnnModel::new(
            vec![4],
            vec![Layer::Dense {
                weights: Tensor::zeros(vec![10, 4]),
            }],
        )
        .unwrap()
    }

    #[test]
    fn uniform_logits_give_ln10() {
        let x = [0.3, -1.0, 2.0, 0.5];
        let (loss, _) = loss_and_grad(&zero_model(), &[&x], &[3]).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_is_an_error() {
        assert!(matches!(
            loss_and_grad(&zero_model(), &[], &[]),
            Err(AnnError::EmptyBatch)
        ));
    }

    #[test]
    fn dead_relu_unit_has_zero_incoming_gradient() {
        // Hidden unit 0 has all-negative incoming weights, so with
        // non-negative inputs it never activates.
        let hidden = Tensor::new(vec![2, 2], vec![-1.0, -1.0, 0.5, 0.25]);
        let out = Tensor::new(vec![2, 2], vec![1.0, -1.0, 0.3, 0.7]);
        let model = AnnModel::new(
            vec![2],
            vec![
                Layer::Dense { weights: hidden },
                Layer::Relu,
                Layer::Dense { weights: out },
            ],
        )
        .unwrap();
        let xs = [[1.0, 0.5], [0.2, 0.9], [0.0, 1.0]];
        let inputs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        let (_, g) = loss_and_grad(&model, &inputs, &[0, 1, 1]).unwrap();
        assert_eq!(&g.per_layer[0][..2], &[0.0, 0.0]);
        assert!(g.per_layer[0][2..].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn evaluate_with_constant_argmax() {
        let labels = vec![0, 1, 2, 0, 3];
        let ds = Dataset::new(Tensor::new(vec![5, 2, 2], vec![0.5; 20]), labels).unwrap();
        let model = zero_model();
        // all-zero logits: every prediction is class 0
        assert!((evaluate(&model, &ds).unwrap() - 3.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn zero_learning_rate_leaves_weights_alone() {
        let mut model = AnnModel::new(
            vec![2, 2],
            vec![
                Layer::Flatten,
                Layer::Dense {
                    weights: Tensor::new(vec![2, 4], vec![0.1, -0.2, 0.3, 0.4, 0.5, 0.6, -0.7, 0.8]),
                },
            ],
        )
        .unwrap();
        let before = model.clone();
        let ds = Dataset::new(
            Tensor::new(vec![3, 2, 2], (0..12).map(|i| i as f64 / 12.0).collect()),
            vec![0, 1, 0],
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 2,
            learning_rate: 0.0,
            seed: 3,
        };
        train(&mut model, &ds, &cfg).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn bad_hyperparameters() {
        let mut model = zero_model();
        let ds = Dataset::new(Tensor::new(vec![1, 2, 2], vec![0.0; 4]), vec![1]).unwrap();
        for cfg in [
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { learning_rate: -1.0, ..Default::default() },
        ] {
            assert!(matches!(
                train(&mut model, &ds, &cfg),
                Err(AnnError::InvalidHyperparameter(_))
            ));
        }
    }

    #[test]
    fn divergence_is_reported() {
        let mut model = AnnModel::new(
            vec![2, 2],
            vec![
                Layer::Flatten,
                Layer::Dense {
                    weights: Tensor::new(vec![10, 4], vec![1.0; 40]),
                },
            ],
        )
        .unwrap();
        let ds = Dataset::new(Tensor::new(vec![2, 2, 2], vec![1.0; 8]), vec![3, 7]).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 1,
            learning_rate: 1e300,
            seed: 0,
        };
        assert!(matches!(
            train(&mut model, &ds, &cfg),
            Err(AnnError::NonFiniteLoss { .. })
        ));
    }
}
