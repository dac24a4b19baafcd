use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spikesim::ann::{AnnModel, Layer};
use spikesim::Tensor;

/// A small bias-free network from one of three shapes, weights uniform in [-1, 1].
pub fn random_model(seed: u64) -> AnnModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = rng.gen_range(0..3);
    let mut w = |shape: Vec<usize>| {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    };
    let model = match arch {
        0 => AnnModel::new(
            vec![5],
            vec![
                Layer::Dense { weights: w(vec![4, 5]) },
                Layer::Relu,
                Layer::Dense { weights: w(vec![3, 4]) },
            ],
        ),
        1 => AnnModel::new(
            vec![1, 6, 6],
            vec![
                Layer::Conv2d { weights: w(vec![2, 1, 3, 3]), stride: 1 },
                Layer::Relu,
                Layer::AvgPool2d { size: 2 },
                Layer::Flatten,
                Layer::Dense { weights: w(vec![3, 8]) },
            ],
        ),
        _ => AnnModel::new(
            vec![2, 7, 7],
            vec![
                Layer::Conv2d { weights: w(vec![3, 2, 3, 3]), stride: 2 },
                Layer::Relu,
                Layer::Flatten,
                Layer::Dense { weights: w(vec![4, 27]) },
                Layer::Relu,
                Layer::Dense { weights: w(vec![3, 4]) },
            ],
        ),
    };
    model.expect("random architecture composes")
}

pub fn random_inputs(len: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..len).map(|_| rng.gen_range(0.0..1.0)).collect()).collect()
}
