//! The three-neuron network where two equally active inputs, one excitatory
//! (`w + ε`) and one inhibitory (`-w`), drive a single output neuron.
//!
//! An ideal output neuron gains `ε` per step and fires steadily. A voltage
//! neuron settles at the neutral point where the two weakened drives cancel,
//! and never fires if its threshold lies above that point.

use serde::Serialize;

use super::layer::{step_layer, EventOrder, SpikingLayer, Synapses};
use super::SimError;
use crate::neuron::{neutral_point, AccumulationModel};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoRun {
    pub spikes: usize,
    /// Potential after each timestep, post reset.
    pub trajectory: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeutralPointDemo {
    pub ideal: DemoRun,
    pub nonlinear: DemoRun,
    /// Analytic neutral point of the nonlinear neuron on rails `[-1, 1]`.
    pub neutral_point: Option<f64>,
}

/// Drives the output neuron for `timesteps` steps with both inputs firing
/// every step. Both spikes of a step see the potential at the start of the
/// step.
pub fn demo_neutral_point(
    w: f64,
    eps: f64,
    theta: f64,
    lambda: f64,
    timesteps: usize,
) -> Result<NeutralPointDemo, SimError> {
    if !(w > 0.0 && eps >= 0.0 && w.is_finite() && eps.is_finite()) {
        return Err(SimError::InvalidConfig(format!(
            "need w > 0 and eps >= 0, got w={w}, eps={eps}"
        )));
    }
    let nonlinear = AccumulationModel::voltage(lambda)?;
    let weights = Tensor::new(vec![1, 2], vec![w + eps, -w]);
    let layer = SpikingLayer::new(Synapses::dense(&weights), theta)?;
    let run = |model: &AccumulationModel| {
        let mut state = layer.state();
        let mut out = Vec::new();
        let mut trajectory = Vec::with_capacity(timesteps);
        for _ in 0..timesteps {
            step_layer(&layer, &mut state, &[(0, 1.0), (1, 1.0)], model, EventOrder::Simultaneous, &mut out);
            trajectory.push(state.v[0]);
        }
        DemoRun {
            spikes: state.counts[0] as usize,
            trajectory,
        }
    };
    Ok(NeutralPointDemo {
        ideal: run(&AccumulationModel::Ideal),
        nonlinear: run(&nonlinear),
        neutral_point: neutral_point(lambda, w, eps, 1.0, -1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_neuron_keeps_firing() {
        let d = demo_neutral_point(0.1, 0.01, 0.05, 0.5, 1000).unwrap();
        assert!(d.ideal.spikes.abs_diff(200) <= 1, "{}", d.ideal.spikes);
        assert!(d.nonlinear.spikes > 0);
    }

    #[test]
    fn voltage_neuron_stalls_at_neutral_point() {
        let d = demo_neutral_point(0.1, 0.01, 0.2, 0.5, 100_000).unwrap();
        assert_eq!(d.nonlinear.spikes, 0);
        let v_star = d.neutral_point.unwrap();
        let last = *d.nonlinear.trajectory.last().unwrap();
        assert!((last - v_star).abs() < 1e-6, "{last} vs {v_star}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(demo_neutral_point(0.0, 0.01, 0.2, 0.5, 10).is_err());
        assert!(demo_neutral_point(0.1, -0.01, 0.2, 0.5, 10).is_err());
        assert!(demo_neutral_point(0.1, 0.01, 0.0, 0.5, 10).is_err());
        assert!(demo_neutral_point(0.1, 0.01, 0.2, -0.5, 10).is_err());
    }
}
