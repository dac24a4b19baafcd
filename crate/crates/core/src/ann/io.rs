//! JSON model documents.
//!
//! ```text
//! {"version":1,"input_shape":[1,28,28],
//!  "layers":[{"kind":"conv2d","hyper":{"stride":1},"shape":[6,1,5,5],"weights":[...]}, ...]}
//! ```
//!
//! Weights are flat row-major arrays. `f64` values are written in shortest
//! round-trip form and parsed exactly, so save/load is bit-identical. Spiking
//! networks reuse this document with a per-layer `threshold` and a top-level
//! `normalization` record.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnnError, AnnModel, Layer};
use crate::tensor::Tensor;

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub kind: String,
    #[serde(default)]
    pub hyper: BTreeMap<String, usize>,
    #[serde(default)]
    pub shape: Vec<usize>,
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub method: String,
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub version: u32,
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<NormalizationRecord>,
}

impl ModelDocument {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("model documents always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, AnnError> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| AnnError::Schema(e.to_string()))?;
        if doc.version != MODEL_VERSION {
            return Err(AnnError::Schema(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                doc.version
            )));
        }
        Ok(doc)
    }

    pub fn write(&self, path: &Path) -> Result<(), AnnError> {
        fs::write(path, self.to_json()).map_err(|source| AnnError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, AnnError> {
        let text = fs::read_to_string(path).map_err(|source| AnnError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

impl LayerRecord {
    pub fn from_layer(layer: &Layer) -> Self {
        let mut hyper = BTreeMap::new();
        match layer {
            Layer::Conv2d { stride, .. } => {
                hyper.insert("stride".to_string(), *stride);
            }
            Layer::AvgPool2d { size } => {
                hyper.insert("size".to_string(), *size);
            }
            _ => {}
        }
        let (shape, weights) = match layer.weights() {
            Some(w) => (w.shape().to_vec(), w.data().to_vec()),
            None => (Vec::new(), Vec::new()),
        };
        Self {
            kind: layer.kind().to_string(),
            hyper,
            shape,
            weights,
            threshold: None,
        }
    }

    fn hyper(&self, key: &str) -> Result<usize, AnnError> {
        self.hyper.get(key).copied().ok_or_else(|| {
            AnnError::Schema(format!("{} layer is missing hyper.{key}", self.kind))
        })
    }

    fn tensor(&self) -> Result<Tensor, AnnError> {
        let expected: usize = self.shape.iter().product();
        if self.weights.len() != expected || self.shape.is_empty() {
            return Err(AnnError::Schema(format!(
                "{} layer has {} weights for shape {:?}",
                self.kind,
                self.weights.len(),
                self.shape
            )));
        }
        Ok(Tensor::new(self.shape.clone(), self.weights.clone()))
    }

    pub fn to_layer(&self) -> Result<Layer, AnnError> {
        Ok(match self.kind.as_str() {
            "dense" => Layer::Dense {
                weights: self.tensor()?,
            },
            "conv2d" => Layer::Conv2d {
                weights: self.tensor()?,
                stride: self.hyper("stride")?,
            },
            "avgpool2d" => Layer::AvgPool2d {
                size: self.hyper("size")?,
            },
            "relu" => Layer::Relu,
            "flatten" => Layer::Flatten,
            other => return Err(AnnError::Schema(format!("unknown layer kind {other:?}"))),
        })
    }
}

impl AnnModel {
    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            version: MODEL_VERSION,
            input_shape: self.input_shape().to_vec(),
            layers: self.layers().iter().map(LayerRecord::from_layer).collect(),
            normalization: None,
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self, AnnError> {
        let layers = doc
            .layers
            .iter()
            .map(LayerRecord::to_layer)
            .collect::<Result<Vec<_>, _>>()?;
        AnnModel::new(doc.input_shape.clone(), layers)
    }
}

pub fn save_model(model: &AnnModel, path: &Path) -> Result<(), AnnError> {
    model.to_document().write(path)
}

pub fn load_model(path: &Path) -> Result<AnnModel, AnnError> {
    AnnModel::from_document(&ModelDocument::read(path)?)
}
