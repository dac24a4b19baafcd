use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encode::{FrameEncoder, InputMode};
use super::layer::{step_layer, EventOrder, LayerState, SpikingLayer, Synapses};
use super::trace::SimTrace;
use super::SimError;
use crate::convert::SnnNetwork;
use crate::mnist::Dataset;
use crate::neuron::AccumulationModel;
use crate::tensor::argmax;

/// Everything that determines a simulation run apart from network and data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub timesteps: usize,
    pub input_mode: InputMode,
    pub max_rate: f64,
    pub seed: u64,
    pub event_order: EventOrder,
    pub model: AccumulationModel,
    /// Worker threads for image-level parallelism; `0` uses all cores.
    /// Results never depend on this value.
    pub workers: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            timesteps: 300,
            input_mode: InputMode::Poisson,
            max_rate: 1.0,
            seed: 0,
            event_order: EventOrder::PerEvent,
            model: AccumulationModel::Ideal,
            workers: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.timesteps == 0 {
            return Err(SimError::InvalidConfig("timesteps must be at least 1".into()));
        }
        if !(self.max_rate > 0.0 && self.max_rate <= 1.0) {
            return Err(SimError::InvalidConfig(format!(
                "max_rate {} must lie in (0, 1]",
                self.max_rate
            )));
        }
        Ok(())
    }

    pub fn with_model(&self, model: AccumulationModel) -> Self {
        Self {
            model,
            ..self.clone()
        }
    }
}

/// Output spike counts of one image, cumulative at every timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRun {
    n_out: usize,
    cumulative: Vec<u32>,
}

impl ImageRun {
    pub fn timesteps(&self) -> usize {
        self.cumulative.len() / self.n_out
    }

    /// Cumulative counts after timestep `t` (0-based).
    pub fn counts_at(&self, t: usize) -> &[u32] {
        &self.cumulative[t * self.n_out..(t + 1) * self.n_out]
    }

    pub fn final_counts(&self) -> &[u32] {
        self.counts_at(self.timesteps() - 1)
    }

    /// Predicted class after timestep `t`; ties go to the smaller index.
    pub fn prediction_at(&self, t: usize) -> usize {
        argmax(self.counts_at(t))
    }
}

/// A network compiled for event-driven scatter, ready to run many images.
#[derive(Debug, Clone)]
pub struct Simulator {
    layers: Vec<SpikingLayer>,
    input_len: usize,
    input_scale: f64,
    config: SimConfig,
}

impl Simulator {
    pub fn new(net: &SnnNetwork, config: &SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let mut layers = Vec::new();
        for ((layer, shape), &theta) in net
            .layers()
            .iter()
            .zip(net.layer_shapes())
            .zip(net.thresholds())
        {
            if let Some(syn) = Synapses::from_layer(layer, shape)? {
                layers.push(SpikingLayer::new(syn, theta)?);
            }
        }
        if layers.is_empty() {
            return Err(SimError::InvalidNetwork("network has no spiking layers".into()));
        }
        Ok(Self {
            layers,
            input_len: net.input_len(),
            input_scale: net.input_scale(),
            config: config.clone(),
        })
    }

    /// Builds a simulator from explicit layers; inputs are used unscaled.
    pub fn from_layers(layers: Vec<SpikingLayer>, config: &SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let Some(first) = layers.first() else {
            return Err(SimError::InvalidNetwork("network has no spiking layers".into()));
        };
        for pair in layers.windows(2) {
            if pair[0].n_out() != pair[1].synapses().n_in() {
                return Err(SimError::InvalidNetwork(format!(
                    "layer with {} outputs feeds a layer with {} inputs",
                    pair[0].n_out(),
                    pair[1].synapses().n_in()
                )));
            }
        }
        Ok(Self {
            input_len: first.synapses().n_in(),
            layers,
            input_scale: 1.0,
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map_or(0, |l| l.n_out())
    }

    /// Simulates one image. `image_index` keys the input spike stream.
    pub fn run_image(&self, image: &[f64], image_index: usize) -> Result<ImageRun, SimError> {
        if image.len() != self.input_len {
            return Err(SimError::ShapeMismatch {
                expected: self.input_len,
                found: image.len(),
            });
        }
        let cfg = &self.config;
        let scaled: Vec<f64> = image
            .iter()
            .map(|&p| (p * self.input_scale).clamp(0.0, 1.0))
            .collect();
        let mut encoder = FrameEncoder::new(&scaled, cfg.input_mode, cfg.max_rate, cfg.seed, image_index);
        let mut states: Vec<LayerState> = self.layers.iter().map(SpikingLayer::state).collect();
        let n_out = self.output_len();
        let mut cumulative = Vec::with_capacity(cfg.timesteps * n_out);
        let mut events = Vec::new();
        let mut next = Vec::new();
        for t in 0..cfg.timesteps {
            encoder.frame(t, &mut events);
            for (layer, state) in self.layers.iter().zip(states.iter_mut()) {
                step_layer(layer, state, &events, &cfg.model, cfg.event_order, &mut next);
                std::mem::swap(&mut events, &mut next);
            }
            cumulative.extend_from_slice(&states.last().expect("at least one layer").counts);
        }
        Ok(ImageRun { n_out, cumulative })
    }

    /// Simulates every image of `ds` and records the error rate at each timestep.
    pub fn run_dataset(&self, ds: &Dataset) -> Result<SimTrace, SimError> {
        if ds.is_empty() {
            return Err(SimError::EmptyDataset);
        }
        let simulate = || {
            (0..ds.len())
                .into_par_iter()
                .map(|i| {
                    let run = self.run_image(ds.image(i), i)?;
                    let label = ds.labels()[i] as usize;
                    let wrong: Vec<bool> = (0..run.timesteps())
                        .map(|t| run.prediction_at(t) != label)
                        .collect();
                    Ok((wrong, run.final_counts().to_vec()))
                })
                .collect::<Result<Vec<_>, SimError>>()
        };
        let outcomes = if self.config.workers == 0 {
            simulate()?
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(self.config.workers)
                .build()
                .map_err(|e| SimError::InvalidConfig(format!("cannot start workers: {e}")))?
                .install(simulate)?
        };
        let mut wrong = vec![0usize; self.config.timesteps];
        let mut final_counts = Vec::with_capacity(outcomes.len());
        for (w, counts) in outcomes {
            for (acc, miss) in wrong.iter_mut().zip(w) {
                *acc += miss as usize;
            }
            final_counts.push(counts);
        }
        let n = ds.len() as f64;
        Ok(SimTrace::new(
            wrong.into_iter().map(|k| k as f64 / n).collect(),
            final_counts,
        ))
    }
}

pub fn run_image(
    net: &SnnNetwork,
    image: &[f64],
    image_index: usize,
    cfg: &SimConfig,
) -> Result<ImageRun, SimError> {
    Simulator::new(net, cfg)?.run_image(image, image_index)
}

pub fn run_dataset(net: &SnnNetwork, ds: &Dataset, cfg: &SimConfig) -> Result<SimTrace, SimError> {
    Simulator::new(net, cfg)?.run_dataset(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::Layer;
    use crate::tensor::Tensor;

    fn identity_net() -> SnnNetwork {
        let w = Tensor::new(vec![1, 1], vec![1.0]);
        SnnNetwork::new(vec![1], vec![Layer::Dense { weights: w }], vec![1.0], vec![1.0, 1.0]).unwrap()
    }

    fn constant(model: AccumulationModel, timesteps: usize) -> SimConfig {
        SimConfig {
            timesteps,
            input_mode: InputMode::ConstantCurrent,
            model,
            workers: 1,
            ..SimConfig::default()
        }
    }

    #[test]
    fn identity_neuron_fires_every_step() {
        let run = run_image(&identity_net(), &[1.0], 0, &constant(AccumulationModel::Ideal, 50)).unwrap();
        for t in 0..50 {
            assert_eq!(run.counts_at(t), &[t as u32 + 1]);
        }
    }

    #[test]
    fn voltage_neuron_fires_less() {
        let ideal = run_image(&identity_net(), &[0.7], 0, &constant(AccumulationModel::Ideal, 100)).unwrap();
        let m = AccumulationModel::voltage(0.5).unwrap();
        let nonlinear = run_image(&identity_net(), &[0.7], 0, &constant(m, 100)).unwrap();
        assert!(nonlinear.final_counts()[0] < ideal.final_counts()[0]);
    }

    #[test]
    fn silent_image_predicts_class_zero() {
        let w = Tensor::new(vec![3, 2], vec![0.5; 6]);
        let net = SnnNetwork::new(vec![2], vec![Layer::Dense { weights: w }], vec![1.0], vec![1.0, 1.0]).unwrap();
        let cfg = SimConfig {
            timesteps: 20,
            ..SimConfig::default()
        };
        let run = run_image(&net, &[0.0, 0.0], 3, &cfg).unwrap();
        assert_eq!(run.final_counts(), &[0, 0, 0]);
        assert_eq!(run.prediction_at(19), 0);
    }

    #[test]
    fn config_and_shape_errors() {
        let net = identity_net();
        let bad = SimConfig {
            timesteps: 0,
            ..SimConfig::default()
        };
        assert!(matches!(run_image(&net, &[1.0], 0, &bad), Err(SimError::InvalidConfig(_))));
        let bad = SimConfig {
            max_rate: 1.5,
            ..SimConfig::default()
        };
        assert!(matches!(run_image(&net, &[1.0], 0, &bad), Err(SimError::InvalidConfig(_))));
        assert!(matches!(
            run_image(&net, &[1.0, 2.0], 0, &SimConfig::default()),
            Err(SimError::ShapeMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn single_correct_image_has_zero_error() {
        let w = Tensor::new(vec![2, 1], vec![0.0, 1.0]);
        let net = SnnNetwork::new(vec![1, 1], vec![Layer::Flatten, Layer::Dense { weights: w }], vec![1.0, 1.0], vec![1.0, 1.0])
            .unwrap();
        let ds = Dataset::new(Tensor::new(vec![1, 1, 1], vec![1.0]), vec![1]).unwrap();
        let trace = run_dataset(&net, &ds, &constant(AccumulationModel::Ideal, 30)).unwrap();
        assert!(trace.error().iter().all(|&e| e == 0.0));
        assert_eq!(trace.stabilized_error(), 0.0);
        let empty = Dataset::new(Tensor::new(vec![0, 1, 1], vec![]), vec![]).unwrap();
        assert!(matches!(run_dataset(&net, &empty, &SimConfig::default()), Err(SimError::EmptyDataset)));
    }
}
