//! Sequential CNNs on top of the tensor kernels: configuration, forward and
//! backward passes, AdamW training and checkpoints.

mod checkpoint;
mod classifier;
mod config;
mod loss;
mod model;
mod params;
mod train;

pub use checkpoint::{
    config_digest, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint,
};
pub use classifier::{Classifier, EVAL_BATCH};
pub use config::{ActShape, Architecture, LayerSpec, ModelConfig};
pub use loss::{cross_entropy, softmax};
pub use model::{argmax, ForwardTrace, Model, Prediction};
pub use params::{AdamW, Gradients, Param, ParamStore};
pub use train::{train, EpochRecord, TrainConfig};
