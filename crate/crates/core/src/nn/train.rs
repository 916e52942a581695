use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::classifier::Classifier;
use super::loss::cross_entropy;
use super::params::AdamW;
use crate::data::LabeledImage;
use crate::error::{config_err, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamW,
    /// Drives the per-epoch shuffles and nothing else.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 128,
            optimizer: AdamW::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean minibatch loss, weighted by batch size.
    pub train_loss: f32,
    /// Accuracy of the predictions made during the epoch's forward passes.
    pub train_acc: f32,
    /// `None` when no test split was supplied.
    pub test_acc: Option<f32>,
}

/// Minibatch AdamW training with cross-entropy loss.
///
/// `on_epoch` sees each record as soon as the epoch finishes.
pub fn train(
    classifier: &mut Classifier,
    train_set: &[LabeledImage],
    test_set: &[LabeledImage],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    if train_set.is_empty() {
        return Err(config_err!("training split is empty"));
    }
    if config.batch_size == 0 {
        return Err(config_err!("batch size must be at least 1"));
    }
    let classes = classifier.num_classes();
    if let Some(bad) = train_set.iter().find(|x| x.label >= classes) {
        return Err(config_err!(
            "image {} has label {} but the model has {classes} classes",
            bad.id,
            bad.label
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch = classifier.prepare(chunk.iter().map(|&i| train_set[i].image()))?;
            let labels: Vec<usize> = chunk.iter().map(|&i| train_set[i].label).collect();
            let (predictions, trace) = classifier.model.forward(&batch)?;
            let logits = crate::tensor::Tensor::new(
                vec![chunk.len(), classes],
                predictions
                    .iter()
                    .flat_map(|p| p.logits.iter().copied())
                    .collect(),
            )?;
            let (loss, cotangent) = cross_entropy(&logits, &labels)?;
            loss_sum += loss as f64 * chunk.len() as f64;
            correct += predictions
                .iter()
                .zip(&labels)
                .filter(|(p, &l)| p.predicted_class == l)
                .count();
            let (_, grads) = classifier.model.backward(&trace, &cotangent, true)?;
            let grads = grads.expect("parameter gradients were requested");
            classifier
                .model
                .params_mut()
                .adamw_step(&grads, &config.optimizer)?;
        }
        let record = EpochRecord {
            epoch,
            train_loss: (loss_sum / train_set.len() as f64) as f32,
            train_acc: correct as f32 / train_set.len() as f32,
            test_acc: if test_set.is_empty() {
                None
            } else {
                Some(classifier.accuracy(test_set)?)
            },
        };
        on_epoch(&record);
        log.push(record);
    }
    Ok(log)
}
