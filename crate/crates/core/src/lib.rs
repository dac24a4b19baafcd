//! Behavioral simulation of analog integrate-and-fire neurons inside spiking
//! networks converted from trained ReLU networks.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`mnist`] loads IDX image and label files.
//! 2. [`ann`] trains a bias-free LeNet-5-style network with plain SGD.
//! 3. [`convert`] rescales its weights from observed activations and turns
//!    every unit into an integrate-and-fire neuron with threshold `1.0`.
//! 4. [`sim`] runs the spiking network timestep by timestep, with a membrane
//!    model from [`neuron`] deciding how each spike moves the potential.

pub mod ann;
pub mod convert;
pub mod mnist;
pub mod neuron;
pub mod sim;
pub mod tensor;

pub use tensor::{argmax, Tensor};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/neuron-models.md")]
    mod neuron_models {}
    #[doc = include_str!("../../../book/src/transfer-curves.md")]
    mod transfer_curves {}
    #[doc = include_str!("../../../book/src/neutral-point.md")]
    mod neutral_point {}
    #[doc = include_str!("../../../book/src/conversion.md")]
    mod conversion {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/rescaling.md")]
    mod rescaling {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
