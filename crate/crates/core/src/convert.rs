//! ANN-to-SNN conversion with data-based weight normalization.
//!
//! For every parameterized layer `l` (counted from 1) the largest post-ReLU
//! activation `λ_l` is measured over a sample set, with `λ_0` the largest
//! input value. Weights become `w_l * λ_{l-1} / λ_l` and every threshold is
//! `1.0`, so a unit that saturated the ANN now fires at the maximum rate of
//! one spike per timestep. ReLU layers disappear; the spiking neurons rectify.

use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::ann::{AnnError, AnnModel, Layer, LayerRecord, ModelDocument, NormalizationRecord};
use crate::mnist::Dataset;

/// Smallest admissible per-layer scale.
pub const LAMBDA_FLOOR: f64 = 1e-9;

pub const UNIT_THRESHOLD: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ConvertError {
    #[error("normalization needs {expected} scale factors, found {found}")]
    MissingStats { expected: usize, found: usize },
    #[error("cannot collect activation statistics from an empty sample")]
    EmptySample,
    #[error("invalid spiking network: {0}")]
    InvalidNetwork(String),
    #[error(transparent)]
    Ann(#[from] AnnError),
}

/// Per-layer maximum activations: `lambdas[0]` for the input, then one entry
/// per parameterized layer in order.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationStats {
    pub lambdas: Vec<f64>,
}

/// Indices into [`AnnModel::forward_record`] output holding the activation
/// that follows each parameterized layer (after its ReLU, when there is one).
fn recorded_outputs(model: &AnnModel) -> Vec<usize> {
    let layers = model.layers();
    layers
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_parameterized())
        .map(|(i, _)| match layers.get(i + 1) {
            Some(Layer::Relu) => i + 2,
            _ => i + 1,
        })
        .collect()
}

/// Data-based normalization statistics over a set of inputs.
pub fn collect_max_activations_on(
    model: &AnnModel,
    inputs: &[&[f64]],
) -> Result<ActivationStats, ConvertError> {
    if inputs.is_empty() {
        return Err(ConvertError::EmptySample);
    }
    let taps = recorded_outputs(model);
    let fold = |mut acc: Vec<f64>, x: &&[f64]| -> Result<Vec<f64>, AnnError> {
        let acts = model.forward_record(x)?;
        acc[0] = acts[0].iter().copied().fold(acc[0], f64::max);
        for (k, &t) in taps.iter().enumerate() {
            acc[k + 1] = acts[t].iter().copied().fold(acc[k + 1], f64::max);
        }
        Ok(acc)
    };
    let init = vec![f64::NEG_INFINITY; taps.len() + 1];
    // max is commutative, so the parallel reduction order does not matter
    let maxima = inputs
        .par_iter()
        .try_fold(|| init.clone(), fold)
        .try_reduce(
            || init.clone(),
            |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect()),
        )?;
    Ok(ActivationStats {
        lambdas: maxima.into_iter().map(|m| m.max(LAMBDA_FLOOR)).collect(),
    })
}

pub fn collect_max_activations(
    model: &AnnModel,
    sample: &Dataset,
) -> Result<ActivationStats, ConvertError> {
    let inputs: Vec<&[f64]> = (0..sample.len()).map(|i| sample.image(i)).collect();
    collect_max_activations_on(model, &inputs)
}

fn check_stats(model: &AnnModel, stats: &ActivationStats) -> Result<(), ConvertError> {
    let expected = model.layers().iter().filter(|l| l.is_parameterized()).count() + 1;
    if stats.lambdas.len() != expected {
        return Err(ConvertError::MissingStats {
            expected,
            found: stats.lambdas.len(),
        });
    }
    Ok(())
}

/// The same architecture (ReLUs included) with weights rescaled by
/// `λ_{l-1} / λ_l`. It expects inputs divided by `λ_0`.
pub fn normalize_ann(model: &AnnModel, stats: &ActivationStats) -> Result<AnnModel, ConvertError> {
    check_stats(model, stats)?;
    let mut k = 0;
    let mut layers = Vec::with_capacity(model.layers().len());
    for layer in model.layers() {
        let mut layer = layer.clone();
        if let Some(w) = layer.weights_mut() {
            k += 1;
            w.scale(stats.lambdas[k - 1] / stats.lambdas[k]);
        }
        layers.push(layer);
    }
    Ok(AnnModel::new(model.input_shape().to_vec(), layers)?)
}

/// Normalizes `model` and drops its ReLU layers.
pub fn normalize_and_convert(
    model: &AnnModel,
    stats: &ActivationStats,
) -> Result<SnnNetwork, ConvertError> {
    let normalized = normalize_ann(model, stats)?;
    let layers: Vec<Layer> = normalized
        .layers()
        .iter()
        .filter(|l| !matches!(l, Layer::Relu))
        .cloned()
        .collect();
    let thresholds = vec![UNIT_THRESHOLD; layers.len()];
    SnnNetwork::new(
        model.input_shape().to_vec(),
        layers,
        thresholds,
        stats.lambdas.clone(),
    )
}

/// A converted network: linear layers whose units are integrate-and-fire
/// neurons. Flatten layers only reshape and carry no neurons.
#[derive(Debug, Clone, PartialEq)]
pub struct SnnNetwork {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    thresholds: Vec<f64>,
    lambdas: Vec<f64>,
    shapes: Vec<Vec<usize>>,
}

impl SnnNetwork {
    pub fn new(
        input_shape: Vec<usize>,
        layers: Vec<Layer>,
        thresholds: Vec<f64>,
        lambdas: Vec<f64>,
    ) -> Result<Self, ConvertError> {
        if layers.iter().any(|l| matches!(l, Layer::Relu)) {
            return Err(ConvertError::InvalidNetwork(
                "relu layers are not allowed in a spiking network".into(),
            ));
        }
        if thresholds.len() != layers.len() {
            return Err(ConvertError::InvalidNetwork(format!(
                "{} thresholds for {} layers",
                thresholds.len(),
                layers.len()
            )));
        }
        if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(ConvertError::InvalidNetwork(format!(
                "threshold {t} must be positive"
            )));
        }
        if lambdas.is_empty() || lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(ConvertError::InvalidNetwork(
                "normalization scales must be positive".into(),
            ));
        }
        // reuse the ANN shape checks
        let ann = AnnModel::new(input_shape.clone(), layers)?;
        let shapes = ann.layer_shapes().to_vec();
        let layers = ann.layers().to_vec();
        Ok(Self {
            input_shape,
            layers,
            thresholds,
            lambdas,
            shapes,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Input shape of every layer followed by the output shape.
    pub fn layer_shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn output_len(&self) -> usize {
        self.shapes.last().unwrap().iter().product()
    }

    /// Factor applied to raw inputs before rate encoding (`1 / λ_0`).
    pub fn input_scale(&self) -> f64 {
        1.0 / self.lambdas[0]
    }

    pub fn to_document(&self) -> ModelDocument {
        let layers = self
            .layers
            .iter()
            .zip(&self.thresholds)
            .map(|(l, &t)| LayerRecord {
                threshold: Some(t),
                ..LayerRecord::from_layer(l)
            })
            .collect();
        ModelDocument {
            version: crate::ann::MODEL_VERSION,
            input_shape: self.input_shape.clone(),
            layers,
            normalization: Some(NormalizationRecord {
                method: "data".into(),
                lambdas: self.lambdas.clone(),
            }),
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self, ConvertError> {
        let norm = doc.normalization.as_ref().ok_or_else(|| {
            ConvertError::Ann(AnnError::Schema("missing normalization record".into()))
        })?;
        let mut layers = Vec::with_capacity(doc.layers.len());
        let mut thresholds = Vec::with_capacity(doc.layers.len());
        for rec in &doc.layers {
            layers.push(rec.to_layer()?);
            thresholds.push(rec.threshold.ok_or_else(|| {
                AnnError::Schema(format!("{} layer is missing its threshold", rec.kind))
            })?);
        }
        Self::new(doc.input_shape.clone(), layers, thresholds, norm.lambdas.clone())
    }

    pub fn save(&self, path: &Path) -> Result<(), ConvertError> {
        Ok(self.to_document().write(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConvertError> {
        Self::from_document(&ModelDocument::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn scalar_net(w: f64) -> AnnModel {
        AnnModel::new(
            vec![1],
            vec![
                Layer::Dense {
                    weights: Tensor::new(vec![1, 1], vec![w]),
                },
                Layer::Relu,
            ],
        )
        .unwrap()
    }

    #[test]
    fn maxima_of_a_scalar_network() {
        let stats = collect_max_activations_on(&scalar_net(2.0), &[&[1.0], &[3.0]]).unwrap();
        assert_eq!(stats.lambdas, vec![3.0, 6.0]);
        let rev = collect_max_activations_on(&scalar_net(2.0), &[&[3.0], &[1.0]]).unwrap();
        assert_eq!(stats, rev);
    }

    #[test]
    fn dead_layer_is_floored() {
        let stats = collect_max_activations_on(&scalar_net(0.0), &[&[1.0]]).unwrap();
        assert_eq!(stats.lambdas, vec![1.0, LAMBDA_FLOOR]);
    }

    #[test]
    fn weights_scale_by_lambda_ratio() {
        let model = AnnModel::new(
            vec![2],
            vec![
                Layer::Dense {
                    weights: Tensor::new(vec![2, 2], vec![1.0, -2.0, 0.5, 4.0]),
                },
                Layer::Relu,
            ],
        )
        .unwrap();
        let snn = normalize_and_convert(&model, &ActivationStats { lambdas: vec![2.0, 4.0] }).unwrap();
        assert_eq!(snn.layers().len(), 1);
        assert_eq!(snn.thresholds(), &[1.0]);
        assert_eq!(
            snn.layers()[0].weights().unwrap().data(),
            &[0.5, -1.0, 0.25, 2.0]
        );

        let same = normalize_ann(&model, &ActivationStats { lambdas: vec![3.0, 3.0] }).unwrap();
        assert_eq!(same, model);
    }

    #[test]
    fn missing_stats() {
        let model = AnnModel::lenet5(0);
        let err = normalize_and_convert(&model, &ActivationStats { lambdas: vec![1.0; 3] });
        assert!(matches!(
            err,
            Err(ConvertError::MissingStats { expected: 6, found: 3 })
        ));
    }

    #[test]
    fn lenet_structure_is_preserved() {
        let model = AnnModel::lenet5(0);
        let snn = normalize_and_convert(&model, &ActivationStats { lambdas: vec![1.0; 6] }).unwrap();
        let kinds: Vec<_> = snn.layers().iter().map(Layer::kind).collect();
        assert_eq!(
            kinds,
            ["conv2d", "avgpool2d", "conv2d", "avgpool2d", "flatten", "dense", "dense", "dense"]
        );
        assert_eq!(snn.output_len(), 10);
    }

    #[test]
    fn snn_document_round_trip() {
        let model = AnnModel::lenet5(4);
        let stats = ActivationStats {
            lambdas: vec![1.0, 2.5, 3.0, 7.25, 4.0, 9.5],
        };
        let snn = normalize_and_convert(&model, &stats).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snn.json");
        snn.save(&path).unwrap();
        let back = SnnNetwork::load(&path).unwrap();
        assert_eq!(back, snn);
        assert_eq!(back.lambdas(), stats.lambdas.as_slice());

        // an ANN file is not a spiking network
        crate::ann::save_model(&model, &path).unwrap();
        assert!(SnnNetwork::load(&path).is_err());
    }
}
