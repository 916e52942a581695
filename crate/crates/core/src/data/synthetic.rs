use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LabeledImage;
use crate::error::{config_err, Result};
use crate::tensor::Tensor;

/// Class-conditional toy images: a dim noisy background with one bright
/// noisy square whose grid cell is chosen by the label.
///
/// Labels are assigned round-robin (`id % num_classes`), so classes are
/// balanced whenever `num_images` is a multiple of `num_classes`. Output is a
/// pure function of the arguments.
pub fn synthetic_dataset(
    num_images: usize,
    num_classes: usize,
    side: usize,
    seed: u64,
) -> Result<Vec<LabeledImage>> {
    if num_classes == 0 {
        return Err(config_err!("synthetic data needs at least one class"));
    }
    let grid = (1..).find(|g| g * g >= num_classes).unwrap();
    let cell = side / grid;
    if cell == 0 {
        return Err(config_err!(
            "{side}x{side} images are too small for {num_classes} class cells"
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_images)
        .map(|i| {
            let label = i % num_classes;
            let (gr, gc) = (label / grid, label % grid);
            let mut data = Vec::with_capacity(3 * side * side);
            for _channel in 0..3 {
                for r in 0..side {
                    for c in 0..side {
                        let lit = r / cell == gr && c / cell == gc;
                        let base = if lit { 0.7 } else { 0.0 };
                        data.push(base + rng.gen_range(0.0f32..0.3));
                    }
                }
            }
            LabeledImage::new(i as u64, label, Tensor::new(vec![3, side, side], data)?)
        })
        .collect()
}
