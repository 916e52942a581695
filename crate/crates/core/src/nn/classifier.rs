use super::model::{Model, Prediction};
use crate::data::{LabeledImage, NormalizationStats};
use crate::error::{config_err, shape_err, Result};
use crate::tensor::Tensor;

/// Images are evaluated in chunks of this many.
pub const EVAL_BATCH: usize = 256;

/// A model together with the input normalization it was trained under.
/// Public methods take raw `[0, 1]` images.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    pub model: Model,
    pub stats: NormalizationStats,
}

impl Classifier {
    pub fn new(model: Model, stats: NormalizationStats) -> Result<Self> {
        if stats.channels() != model.config().input.0 {
            return Err(shape_err!(
                "normalization has {} channels, model expects {}",
                stats.channels(),
                model.config().input.0
            ));
        }
        Ok(Self { model, stats })
    }

    pub fn num_classes(&self) -> usize {
        self.model.config().num_classes
    }

    /// Normalized NCHW batch of raw images.
    pub fn prepare<'a, I>(&self, images: I) -> Result<Tensor>
    where
        I: IntoIterator<Item = &'a Tensor>,
    {
        self.stats.batch(images)
    }

    /// Predictions for raw images, evaluated in fixed chunks of
    /// [`EVAL_BATCH`] so results do not depend on the caller's grouping.
    pub fn predict(&self, images: &[&Tensor]) -> Result<Vec<Prediction>> {
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(EVAL_BATCH) {
            let batch = self.prepare(chunk.iter().copied())?;
            out.extend(self.model.forward(&batch)?.0);
        }
        Ok(out)
    }

    pub fn predict_classes(&self, images: &[&Tensor]) -> Result<Vec<usize>> {
        Ok(self
            .predict(images)?
            .into_iter()
            .map(|p| p.predicted_class)
            .collect())
    }

    /// Share of images whose predicted class equals the label.
    pub fn accuracy(&self, dataset: &[LabeledImage]) -> Result<f32> {
        if dataset.is_empty() {
            return Err(config_err!("cannot measure accuracy on an empty split"));
        }
        let images: Vec<&Tensor> = dataset.iter().map(|x| x.image()).collect();
        let predicted = self.predict_classes(&images)?;
        let correct = predicted
            .iter()
            .zip(dataset)
            .filter(|(p, x)| **p == x.label)
            .count();
        Ok(correct as f32 / dataset.len() as f32)
    }
}
