//! Fixtures shared by the benchmarks.

use ndarray::Array2;
use rand::Rng;
use splinelc::netcore::init;
use splinelc::{Activation, Network};

/// 784 → 200×4 → 10 ReLU MLP, the size used for MNIST runs.
pub fn mnist_mlp(seed: u64) -> Network {
    init(&[784, 200, 200, 200, 200, 10], Activation::Relu, seed, 1.0).expect("valid architecture")
}

/// Uniform `[0, 1)` rows.
pub fn unit_batch(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = splinelc::seed::rng(seed);
    Array2::from_shape_simple_fn((n, d), || rng.random::<f64>())
}

/// 2 → w → w → 2 ReLU net for slice benchmarks.
pub fn planar_net(width: usize, seed: u64) -> Network {
    init(&[2, width, width, 2], Activation::Relu, seed, 1.0).expect("valid architecture")
}
