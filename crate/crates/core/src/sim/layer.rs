//! Integrate-and-fire populations driven by sparse spike events.

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::ann::kernels::ConvGeometry;
use crate::ann::{conv_geometry, Layer};
use crate::neuron::AccumulationModel;
use crate::tensor::Tensor;

/// How the spikes arriving in one timestep are combined at a neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventOrder {
    /// One increment per incoming event, presynaptic indices ascending.
    #[default]
    PerEvent,
    /// Sum the weighted input first, then apply a single increment.
    Aggregated,
    /// Evaluate every gain at the potential held at the start of the step;
    /// excitatory and inhibitory drive are weighted separately.
    Simultaneous,
}

/// Connectivity of one spiking layer, arranged for scatter from a
/// presynaptic index to all its targets.
#[derive(Debug, Clone)]
pub enum Synapses {
    /// Row-major `[in][out]` (transposed from the ANN layout).
    Dense {
        n_in: usize,
        n_out: usize,
        weights: Vec<f64>,
    },
    Conv {
        geometry: ConvGeometry,
        weights: Vec<f64>,
    },
    /// Non-overlapping `size × size` pooling; every synapse weighs `1/size²`.
    Pool {
        size: usize,
        ch: usize,
        h: usize,
        w: usize,
    },
}

impl Synapses {
    /// Synapses for `layer` fed with `input_shape`; `None` for layers that
    /// hold no neurons.
    pub fn from_layer(layer: &Layer, input_shape: &[usize]) -> Result<Option<Self>, SimError> {
        let shape_err = |e| SimError::InvalidNetwork(format!("{e}"));
        Ok(match layer {
            Layer::Dense { weights } => {
                let s = weights.shape();
                let (n_out, n_in) = (s[0], s[1]);
                let w = weights.data();
                let mut t = vec![0.0; n_in * n_out];
                for o in 0..n_out {
                    for i in 0..n_in {
                        t[i * n_out + o] = w[o * n_in + i];
                    }
                }
                Some(Synapses::Dense {
                    n_in,
                    n_out,
                    weights: t,
                })
            }
            Layer::Conv2d { weights, stride } => {
                let geometry = conv_geometry(weights, *stride, input_shape).map_err(shape_err)?;
                Some(Synapses::Conv {
                    geometry,
                    weights: weights.data().to_vec(),
                })
            }
            Layer::AvgPool2d { size } => {
                layer.output_shape(input_shape).map_err(shape_err)?;
                Some(Synapses::Pool {
                    size: *size,
                    ch: input_shape[0],
                    h: input_shape[1],
                    w: input_shape[2],
                })
            }
            Layer::Flatten => None,
            Layer::Relu => {
                return Err(SimError::InvalidNetwork(
                    "relu layers cannot be simulated".into(),
                ))
            }
        })
    }

    /// Fully connected synapses from a `[out, in]` weight matrix.
    pub fn dense(weights: &Tensor) -> Self {
        Self::from_layer(
            &Layer::Dense {
                weights: weights.clone(),
            },
            &weights.shape()[1..],
        )
        .expect("dense synapses need a [out, in] matrix")
        .expect("dense layers hold neurons")
    }

    pub fn n_in(&self) -> usize {
        match self {
            Synapses::Dense { n_in, .. } => *n_in,
            Synapses::Conv { geometry: g, .. } => g.in_ch * g.in_h * g.in_w,
            Synapses::Pool { ch, h, w, .. } => ch * h * w,
        }
    }

    pub fn n_out(&self) -> usize {
        match self {
            Synapses::Dense { n_out, .. } => *n_out,
            Synapses::Conv { geometry: g, .. } => g.out_ch * g.out_h() * g.out_w(),
            Synapses::Pool { size, ch, h, w } => ch * (h / size) * (w / size),
        }
    }

    /// Calls `f(target, weight)` for every synapse leaving presynaptic `j`.
    /// Each target appears at most once.
    #[inline]
    pub fn for_each_target(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        match self {
            Synapses::Dense { n_out, weights, .. } => {
                let row = &weights[j * n_out..(j + 1) * n_out];
                for (o, &w) in row.iter().enumerate() {
                    f(o, w);
                }
            }
            Synapses::Conv { geometry: g, weights } => {
                let (oh, ow) = (g.out_h(), g.out_w());
                let c = j / (g.in_h * g.in_w);
                let y = (j / g.in_w) % g.in_h;
                let x = j % g.in_w;
                for ky in 0..g.k_h.min(y + 1) {
                    let dy = y - ky;
                    if !dy.is_multiple_of(g.stride) || dy / g.stride >= oh {
                        continue;
                    }
                    let oy = dy / g.stride;
                    for kx in 0..g.k_w.min(x + 1) {
                        let dx = x - kx;
                        if !dx.is_multiple_of(g.stride) || dx / g.stride >= ow {
                            continue;
                        }
                        let ox = dx / g.stride;
                        for o in 0..g.out_ch {
                            let w = weights[((o * g.in_ch + c) * g.k_h + ky) * g.k_w + kx];
                            f((o * oh + oy) * ow + ox, w);
                        }
                    }
                }
            }
            Synapses::Pool { size, h, w, .. } => {
                let (oh, ow) = (h / size, w / size);
                let c = j / (h * w);
                let oy = (j / w) % h / size;
                let ox = j % w / size;
                if oy < oh && ox < ow {
                    f((c * oh + oy) * ow + ox, 1.0 / (size * size) as f64);
                }
            }
        }
    }
}

/// A population of integrate-and-fire neurons sharing one threshold.
#[derive(Debug, Clone)]
pub struct SpikingLayer {
    synapses: Synapses,
    threshold: f64,
}

impl SpikingLayer {
    pub fn new(synapses: Synapses, threshold: f64) -> Result<Self, SimError> {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "threshold {threshold} must be positive"
            )));
        }
        Ok(Self {
            synapses,
            threshold,
        })
    }

    pub fn synapses(&self) -> &Synapses {
        &self.synapses
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn n_out(&self) -> usize {
        self.synapses.n_out()
    }

    pub fn state(&self) -> LayerState {
        LayerState::new(self.n_out())
    }
}

/// Mutable per-image state of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    /// Membrane potentials.
    pub v: Vec<f64>,
    /// Cumulative spike counts.
    pub counts: Vec<u32>,
    drive: Vec<f64>,
    inhibit: Vec<f64>,
}

impl LayerState {
    pub fn new(n: usize) -> Self {
        Self {
            v: vec![0.0; n],
            counts: vec![0; n],
            drive: vec![0.0; n],
            inhibit: vec![0.0; n],
        }
    }

    pub fn reset(&mut self) {
        self.v.iter_mut().for_each(|v| *v = 0.0);
        self.counts.iter_mut().for_each(|c| *c = 0);
    }
}

/// Advances `state` by one timestep.
///
/// `incoming` lists `(presynaptic index, amplitude)` pairs in ascending index
/// order: amplitude `1.0` for a spike, or an analog current. After
/// integration every neuron at or above threshold emits one spike and loses
/// `θ` from its potential; any surplus carries into the next step. Emitted
/// spikes are written to `outgoing` in ascending order.
pub fn step_layer(
    layer: &SpikingLayer,
    state: &mut LayerState,
    incoming: &[(usize, f64)],
    model: &AccumulationModel,
    order: EventOrder,
    outgoing: &mut Vec<(usize, f64)>,
) {
    let syn = &layer.synapses;
    match order {
        EventOrder::PerEvent => {
            let v = &mut state.v;
            for &(j, a) in incoming {
                syn.for_each_target(j, |i, w| v[i] = model.apply(v[i], w * a));
            }
        }
        EventOrder::Aggregated => {
            let drive = &mut state.drive;
            for &(j, a) in incoming {
                syn.for_each_target(j, |i, w| drive[i] += w * a);
            }
            for (v, d) in state.v.iter_mut().zip(drive.iter_mut()) {
                if *d != 0.0 {
                    *v = model.apply(*v, *d);
                    *d = 0.0;
                }
            }
        }
        EventOrder::Simultaneous => {
            let (exc, inh) = (&mut state.drive, &mut state.inhibit);
            for &(j, a) in incoming {
                syn.for_each_target(j, |i, w| {
                    let x = w * a;
                    if x >= 0.0 {
                        exc[i] += x;
                    } else {
                        inh[i] += x;
                    }
                });
            }
            for ((v, e), n) in state.v.iter_mut().zip(exc.iter_mut()).zip(inh.iter_mut()) {
                if *e != 0.0 || *n != 0.0 {
                    *v = model.apply_simultaneous(*v, *e, *n);
                    *e = 0.0;
                    *n = 0.0;
                }
            }
        }
    }
    outgoing.clear();
    let theta = layer.threshold;
    for (i, (v, c)) in state.v.iter_mut().zip(state.counts.iter_mut()).enumerate() {
        if *v >= theta {
            *v -= theta;
            *c += 1;
            outgoing.push((i, 1.0));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(weights: &[f64], threshold: f64) -> SpikingLayer {
        let w = Tensor::new(vec![1, weights.len()], weights.to_vec());
        SpikingLayer::new(Synapses::dense(&w), threshold).unwrap()
    }

    fn run(layer: &SpikingLayer, v0: f64, incoming: &[(usize, f64)], model: &AccumulationModel) -> (f64, bool) {
        let mut st = layer.state();
        st.v[0] = v0;
        let mut out = Vec::new();
        step_layer(layer, &mut st, incoming, model, EventOrder::PerEvent, &mut out);
        (st.v[0], !out.is_empty())
    }

    #[test]
    fn reset_by_subtraction() {
        let l = single(&[0.3], 1.0);
        let (v, spiked) = run(&l, 0.9, &[(0, 1.0)], &AccumulationModel::Ideal);
        assert!(spiked);
        assert!((v - 0.2).abs() < 1e-15);
        let (v, spiked) = run(&l, 0.5, &[(0, 1.0)], &AccumulationModel::Ideal);
        assert!(!spiked);
        assert!((v - 0.8).abs() < 1e-15);
    }

    #[test]
    fn at_most_one_spike_per_step() {
        let l = single(&[2.5], 1.0);
        let mut st = l.state();
        let mut out = Vec::new();
        step_layer(&l, &mut st, &[(0, 1.0)], &AccumulationModel::Ideal, EventOrder::PerEvent, &mut out);
        assert_eq!(out, vec![(0, 1.0)]);
        assert_eq!(st.v[0], 1.5);
        step_layer(&l, &mut st, &[], &AccumulationModel::Ideal, EventOrder::PerEvent, &mut out);
        assert_eq!(st.v[0], 0.5);
        assert_eq!(st.counts[0], 2);
    }

    #[test]
    fn voltage_neuron_is_order_dependent() {
        let m = AccumulationModel::voltage(0.5).unwrap();
        let up_down = single(&[0.6, -0.6], 10.0);
        let down_up = single(&[-0.6, 0.6], 10.0);
        let both = [(0, 1.0), (1, 1.0)];
        let (a, _) = run(&up_down, 0.0, &both, &m);
        let (b, _) = run(&down_up, 0.0, &both, &m);
        // f-(0.6) = (1 + 0.5·1.6)/1.5 = 1.2, f+(-0.6) = (1 + 0.5·1.6)/1.5 = 1.2
        assert!((a - (0.6 - 0.6 * 1.2)).abs() < 1e-15);
        assert!((b - (-0.6 + 0.6 * 1.2)).abs() < 1e-15);
        assert!((a + 0.12).abs() < 1e-12 && (b - 0.12).abs() < 1e-12);
        assert_ne!(a, b);
    }

    #[test]
    fn aggregated_and_simultaneous_orders() {
        let m = AccumulationModel::voltage(0.5).unwrap();
        let l = single(&[0.6, -0.6], 10.0);
        let both = [(0, 1.0), (1, 1.0)];
        let mut st = l.state();
        let mut out = Vec::new();
        step_layer(&l, &mut st, &both, &m, EventOrder::Aggregated, &mut out);
        assert_eq!(st.v[0], 0.0);
        let mut st = l.state();
        st.v[0] = 0.5;
        step_layer(&l, &mut st, &both, &m, EventOrder::Simultaneous, &mut out);
        let expected = 0.5 + 0.6 * m.gain(0.5, true) - 0.6 * m.gain(0.5, false);
        assert!((st.v[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn conv_scatter_matches_dense_convolution() {
        use crate::ann::kernels::conv_forward;
        let weights: Vec<f64> = (0..2 * 3 * 2 * 2).map(|i| (i as f64 * 0.37).sin()).collect();
        let wt = Tensor::new(vec![2, 3, 2, 2], weights.clone());
        for stride in [1, 2] {
            let syn = Synapses::from_layer(&Layer::Conv2d { weights: wt.clone(), stride }, &[3, 5, 5])
                .unwrap()
                .unwrap();
            let Synapses::Conv { geometry, .. } = &syn else { unreachable!() };
            let x: Vec<f64> = (0..75).map(|i| (i as f64 * 0.11).cos()).collect();
            let mut dense = vec![0.0; syn.n_out()];
            conv_forward(geometry, &weights, &x, &mut dense);
            let mut scattered = vec![0.0; syn.n_out()];
            for (j, &a) in x.iter().enumerate() {
                syn.for_each_target(j, |i, w| scattered[i] += w * a);
            }
            for (a, b) in dense.iter().zip(&scattered) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pool_scatter_averages() {
        let syn = Synapses::from_layer(&Layer::AvgPool2d { size: 2 }, &[1, 5, 4]).unwrap().unwrap();
        assert_eq!(syn.n_out(), 4);
        let mut out = vec![0.0; 4];
        for j in 0..20 {
            syn.for_each_target(j, |i, w| out[i] += w);
        }
        // the fifth row falls outside every pooling window
        assert_eq!(out, vec![1.0; 4]);
        assert!(Synapses::from_layer(&Layer::Flatten, &[1, 5, 4]).unwrap().is_none());
    }
}
