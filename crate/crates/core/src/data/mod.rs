//! Datasets, normalization and image/map export.

mod cifar;
mod netpbm;
mod normalize;
mod synthetic;

pub use cifar::{load_cifar10, parse_cifar_batch, CifarSplits, CIFAR_CLASSES, RECORD_BYTES};
pub use netpbm::{export_image, export_map, read_netpbm, write_pgm, write_ppm, ImageFormat};
pub use normalize::{compute_stats, NormalizationStats};
pub use synthetic::synthetic_dataset;

use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

/// One image with raw channel values in `[0, 1]`, its label and a stable id.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImage {
    pub id: u64,
    pub label: usize,
    image: Tensor,
}

impl LabeledImage {
    /// `image` must be a `C×H×W` tensor with every value in `[0, 1]`.
    pub fn new(id: u64, label: usize, image: Tensor) -> Result<Self> {
        if image.rank() != 3 {
            return Err(shape_err!(
                "expected a CxHxW image, got {:?}",
                image.shape()
            ));
        }
        if !image.data().iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(crate::Error::Argument(format!(
                "image {id} has values outside [0, 1]"
            )));
        }
        Ok(Self { id, label, image })
    }

    pub fn image(&self) -> &Tensor {
        &self.image
    }

    /// `(channels, height, width)`
    pub fn dims(&self) -> (usize, usize, usize) {
        let s = self.image.shape();
        (s[0], s[1], s[2])
    }
}
