//! Fixtures for the criterion benchmarks in `benches/`.

use salmap::data::{compute_stats, synthetic_dataset};
use salmap::{Classifier, LabeledImage, Model, ModelConfig, Tensor};

/// A deterministic tensor with values spread over `[-0.5, 0.5)`.
pub fn filled(shape: &[usize]) -> Tensor {
    let len = shape.iter().product();
    let data = (0..len)
        .map(|i| ((i * 7919) % 1000) as f32 / 1000.0 - 0.5)
        .collect();
    Tensor::new(shape.to_vec(), data).expect("positive dims")
}

/// An untrained basic CNN at CIFAR geometry with synthetic images to feed
/// it. Timing does not depend on the weights' values.
pub fn basic_cnn_fixture(images: usize) -> (Classifier, Vec<LabeledImage>) {
    let data = synthetic_dataset(images, 10, 32, 1).expect("valid geometry");
    let model = Model::build(ModelConfig::basic_cnn((3, 32, 32), 10), 1).expect("valid preset");
    let stats = compute_stats(&data).expect("non-empty");
    (
        Classifier::new(model, stats).expect("matching channels"),
        data,
    )
}
