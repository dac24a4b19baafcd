//! Timestep-driven spiking inference.
//!
//! Every timestep the input layer emits rate-coded events, and each layer in
//! turn integrates the events of the layer below and fires. A layer's output
//! at step `t` feeds the next layer within the same step. The predicted class
//! at `t` is the output neuron with the most spikes so far.

mod demo;
mod encode;
mod layer;
mod run;
mod trace;

use thiserror::Error;

pub use demo::{demo_neutral_point, DemoRun, NeutralPointDemo};
pub use encode::{encode_input, FrameEncoder, InputMode};
pub use layer::{step_layer, EventOrder, LayerState, SpikingLayer, Synapses};
pub use run::{run_dataset, run_image, ImageRun, SimConfig, Simulator};
pub use trace::{sidecar_path, stabilized_mean, write_sidecar, SimTrace, STABILIZED_FRACTION};

use crate::neuron::NeuronError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("network cannot be simulated: {0}")]
    InvalidNetwork(String),
    #[error("input has {found} values, network expects {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Neuron(#[from] NeuronError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}
