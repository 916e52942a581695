//! Sign-aware and multi-class saliency maps for small convolutional
//! classifiers, and deletion benchmarks that score them.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`]: dense `f32` tensors with convolution, pooling, activation
//!   and affine kernels, each with a hand-written backward pass.
//! - [`nn`]: sequential CNNs, cross-entropy, AdamW, training, checkpoints.
//! - [`saliency`]: per-class gradient cubes and the original, positive,
//!   negative, active and inactive maps.
//! - [`deletion`]: black-/white-deletion allegiance curves and their AUC.
//! - [`data`]: CIFAR-10 binaries, synthetic data, normalization, netpbm
//!   export.

pub mod data;
pub mod deletion;
mod error;
pub mod nn;
pub mod saliency;
pub mod tensor;

pub use data::{LabeledImage, NormalizationStats};
pub use deletion::{Color, DeletionCurve, DeletionPlan};
pub use error::{Error, Result};
pub use nn::{Architecture, Classifier, Model, ModelConfig, Prediction};
pub use saliency::{GradientCube, MapKind, SaliencyMap, ScoreKind, SignMode};
pub use tensor::Tensor;
