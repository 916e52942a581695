use super::LabeledImage;
use crate::error::{config_err, shape_err, Result};
use crate::tensor::Tensor;

/// Per-channel mean and standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizationStats {
    mean: Vec<f32>,
    std: Vec<f32>,
}

impl NormalizationStats {
    pub fn new(mean: Vec<f32>, std: Vec<f32>) -> Result<Self> {
        if mean.len() != std.len() || mean.is_empty() {
            return Err(config_err!(
                "normalization needs matching non-empty mean/std, got {} and {}",
                mean.len(),
                std.len()
            ));
        }
        if let Some(ch) = std.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(config_err!(
                "channel {ch} has non-positive standard deviation {}",
                std[ch]
            ));
        }
        Ok(Self { mean, std })
    }

    /// Mean 0, std 1 on every channel.
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    pub fn mean(&self) -> &[f32] {
        &self.mean
    }

    pub fn std(&self) -> &[f32] {
        &self.std
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    /// `(x - mean) / std` per channel of a `C×H×W` image, appended to `out`.
    pub fn normalize_into(&self, image: &Tensor, out: &mut Vec<f32>) -> Result<()> {
        let c = image.shape()[0];
        if image.rank() != 3 || c != self.channels() {
            return Err(shape_err!(
                "normalization has {} channels but image is {:?}",
                self.channels(),
                image.shape()
            ));
        }
        let plane = image.len() / c;
        for (ch, values) in image.data().chunks_exact(plane).enumerate() {
            let (m, s) = (self.mean[ch], self.std[ch]);
            out.extend(values.iter().map(|v| (v - m) / s));
        }
        Ok(())
    }

    pub fn normalize(&self, image: &Tensor) -> Result<Tensor> {
        let mut out = Vec::with_capacity(image.len());
        self.normalize_into(image, &mut out)?;
        Tensor::new(image.shape().to_vec(), out)
    }

    /// Normalizes and stacks images into one NCHW batch.
    pub fn batch<'a, I>(&self, images: I) -> Result<Tensor>
    where
        I: IntoIterator<Item = &'a Tensor>,
    {
        let mut data = Vec::new();
        let mut shape: Option<Vec<usize>> = None;
        let mut n = 0;
        for image in images {
            match &shape {
                None => shape = Some(image.shape().to_vec()),
                Some(s) if s.as_slice() != image.shape() => {
                    return Err(shape_err!(
                        "batch mixes image shapes {:?} and {:?}",
                        s,
                        image.shape()
                    ))
                }
                Some(_) => {}
            }
            self.normalize_into(image, &mut data)?;
            n += 1;
        }
        let mut full = vec![n];
        full.extend(shape.ok_or_else(|| shape_err!("cannot batch zero images"))?);
        Tensor::new(full, data)
    }
}

/// Per-channel mean and (population) standard deviation over a split.
///
/// Sums are accumulated in `f64` per image and then across images, so the
/// result does not depend on image order beyond final rounding.
pub fn compute_stats(images: &[LabeledImage]) -> Result<NormalizationStats> {
    let first = images
        .first()
        .ok_or_else(|| config_err!("cannot compute normalization statistics of an empty split"))?;
    let (c, h, w) = first.dims();
    let plane = h * w;
    let mut sum = vec![0.0f64; c];
    let mut sum_sq = vec![0.0f64; c];
    for item in images {
        if item.dims() != (c, h, w) {
            return Err(shape_err!(
                "image {} is {:?}, expected {:?}",
                item.id,
                item.dims(),
                (c, h, w)
            ));
        }
        for (ch, values) in item.image().data().chunks_exact(plane).enumerate() {
            sum[ch] += values.iter().map(|&v| v as f64).sum::<f64>();
            sum_sq[ch] += values.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>();
        }
    }
    let count = (images.len() * plane) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();
    let std: Vec<f32> = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| ((sq / count - m * m).max(0.0)).sqrt() as f32)
        .collect();
    NormalizationStats::new(mean.iter().map(|&m| m as f32).collect(), std)
}
