mod common;

use proptest::prelude::*;

use spikesim::ann::{self, AnnModel};
use spikesim::mnist::{encode_idx_images, encode_idx_labels, parse_idx_images, parse_idx_labels};
use spikesim::Tensor;

use common::{random_inputs, random_model};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn analytic_gradient_matches_finite_differences(seed in any::<u64>(), label_seed in 0u8..30) {
        let model = random_model(seed);
        let inputs = random_inputs(model.input_len(), 3, seed ^ 0x5eed);
        let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let n_out = model.output_len() as u8;
        let labels: Vec<u8> = (0..3).map(|i| (label_seed + i) % n_out).collect();
        let err = ann::gradient_check(&model, &refs, &labels, 1e-6).unwrap();
        prop_assert!(err <= 1e-4, "relative error {err:e}");
    }

    #[test]
    fn model_files_round_trip_bit_exact(seed in any::<u64>()) {
        let model = random_model(seed);
        let back = AnnModel::from_document(&ann::ModelDocument::from_json(&model.to_document().to_json()).unwrap()).unwrap();
        prop_assert_eq!(back, model);
    }

    #[test]
    fn idx_files_round_trip(rows in 1usize..6, cols in 1usize..6, bytes in prop::collection::vec(any::<u8>(), 1..4 * 36)) {
        let n = bytes.len() / (rows * cols);
        prop_assume!(n > 0);
        let pixels: Vec<f64> = bytes[..n * rows * cols].iter().map(|&b| f64::from(b) / 255.0).collect();
        let images = Tensor::new(vec![n, rows, cols], pixels);
        let parsed = parse_idx_images(&encode_idx_images(&images), false).unwrap();
        prop_assert_eq!(parsed, images);

        let labels: Vec<u8> = bytes.iter().map(|b| b % 10).collect();
        prop_assert_eq!(parse_idx_labels(&encode_idx_labels(&labels)).unwrap(), labels);
    }

    #[test]
    fn truncated_idx_files_are_rejected(n in 1usize..5, cut in 1usize..20) {
        let images = Tensor::zeros(vec![n, 4, 4]);
        let bytes = encode_idx_images(&images);
        let cut = cut.min(bytes.len());
        prop_assert!(parse_idx_images(&bytes[..bytes.len() - cut], false).is_err());
    }
}
