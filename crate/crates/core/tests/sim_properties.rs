mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spikesim::convert::{collect_max_activations_on, normalize_and_convert, SnnNetwork};
use spikesim::mnist::Dataset;
use spikesim::neuron::AccumulationModel;
use spikesim::sim::{encode_input, step_layer, EventOrder, InputMode, SimConfig, Simulator, SpikingLayer, Synapses};
use spikesim::Tensor;

use common::{random_inputs, random_model};

fn converted(seed: u64) -> (SnnNetwork, Dataset) {
    let model = random_model(seed);
    let inputs = random_inputs(model.input_len(), 6, seed.wrapping_add(9));
    let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let stats = collect_max_activations_on(&model, &refs).unwrap();
    let snn = normalize_and_convert(&model, &stats).unwrap();
    let mut shape = vec![inputs.len()];
    shape.extend_from_slice(model.input_shape());
    let labels = (0..inputs.len()).map(|i| (i % model.output_len()) as u8).collect();
    let ds = Dataset::new(Tensor::new(shape, inputs.concat()), labels).unwrap();
    (snn, ds)
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Default)]
struct Compensated(f64, f64);

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.0 + x;
        self.1 += if self.0.abs() >= x.abs() { (self.0 - t) + x } else { (x - t) + self.0 };
        self.0 = t;
    }

    fn value(self) -> f64 {
        self.0 + self.1
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn charge_is_conserved_by_reset_by_subtraction(seed in any::<u64>(), theta in 1.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n_in, n_out) = (20, 5);
        let weights = Tensor::new(vec![n_out, n_in], (0..n_in * n_out).map(|_| rng.gen_range(-0.2..0.3)).collect());
        let layer = SpikingLayer::new(Synapses::dense(&weights), theta).unwrap();
        let mut state = layer.state();
        let mut injected = vec![Compensated::default(); n_out];
        let mut out = Vec::new();
        for _ in 0..200 {
            let events: Vec<(usize, f64)> = (0..n_in).filter(|_| rng.gen_bool(0.3)).map(|j| (j, 1.0)).collect();
            for &(j, a) in &events {
                for (o, sum) in injected.iter_mut().enumerate() {
                    sum.add(weights.data()[o * n_in + j] * a);
                }
            }
            step_layer(&layer, &mut state, &events, &AccumulationModel::Ideal, EventOrder::PerEvent, &mut out);
            prop_assert!(out.len() <= n_out);
        }
        for ((sum, v), count) in injected.iter().zip(&state.v).zip(&state.counts) {
            let balance = v + theta * f64::from(*count);
            prop_assert!((sum.value() - balance).abs() <= 1e-12);
        }
    }

    #[test]
    fn constant_drive_fires_at_its_rate(a in 0.0f64..1.0, theta in 0.5f64..2.0, steps in 1usize..400) {
        let drive = a * theta;
        let layer = SpikingLayer::new(Synapses::dense(&Tensor::new(vec![1, 1], vec![drive])), theta).unwrap();
        let mut state = layer.state();
        let mut out = Vec::new();
        for _ in 0..steps {
            step_layer(&layer, &mut state, &[(0, 1.0)], &AccumulationModel::Ideal, EventOrder::PerEvent, &mut out);
        }
        let rate = f64::from(state.counts[0]) / steps as f64;
        prop_assert!((rate - drive / theta).abs() <= 1.0 / steps as f64 + 1e-12);
    }

    #[test]
    fn poisson_inputs_fire_at_the_pixel_rate(pixel in 0.0f64..1.0, max_rate in 0.1f64..1.0, seed in any::<u64>()) {
        let n = 20_000;
        let fired: f64 = (0..n).map(|t| encode_input(pixel, t, InputMode::Poisson, max_rate, seed, 0, 0)).sum();
        let p = pixel * max_rate;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        prop_assert!((fired / n as f64 - p).abs() <= 5.0 * sigma + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn unit_gain_time_domain_is_the_ideal_neuron(seed in any::<u64>()) {
        let (snn, ds) = converted(seed);
        let cfg = SimConfig { timesteps: 60, seed, ..SimConfig::default() };
        let ideal = Simulator::new(&snn, &cfg).unwrap();
        let time = Simulator::new(&snn, &cfg.with_model(AccumulationModel::time_domain(1.0).unwrap())).unwrap();
        for i in 0..ds.len() {
            prop_assert_eq!(ideal.run_image(ds.image(i), i).unwrap(), time.run_image(ds.image(i), i).unwrap());
        }
    }

    #[test]
    fn worker_count_does_not_change_results(seed in any::<u64>(), workers in 2usize..6) {
        let (snn, ds) = converted(seed);
        let cfg = SimConfig {
            timesteps: 40,
            seed,
            model: AccumulationModel::voltage(0.5).unwrap(),
            workers: 1,
            ..SimConfig::default()
        };
        let one = Simulator::new(&snn, &cfg).unwrap().run_dataset(&ds).unwrap();
        let many = Simulator::new(&snn, &SimConfig { workers, ..cfg.clone() }).unwrap().run_dataset(&ds).unwrap();
        prop_assert_eq!(one, many);
    }

    #[test]
    fn counts_are_cumulative_and_bounded(seed in any::<u64>()) {
        let (snn, ds) = converted(seed);
        let cfg = SimConfig { timesteps: 30, seed, ..SimConfig::default() };
        let run = Simulator::new(&snn, &cfg).unwrap().run_image(ds.image(0), 0).unwrap();
        for t in 1..run.timesteps() {
            for (now, before) in run.counts_at(t).iter().zip(run.counts_at(t - 1)) {
                prop_assert!(now >= before && now - before <= 1);
            }
        }
    }
}
