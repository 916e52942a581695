use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

/// Row-wise softmax, stabilized by subtracting the row maximum.
pub fn softmax(logits: &[f32]) -> Vec<f32> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f32> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f32 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Mean negative log-likelihood of the true labels under the softmax of
/// `logits` (`N × C`), and its gradient `(softmax − one_hot) / N`.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f32, Tensor)> {
    let (n, classes) = logits.dims2()?;
    if labels.len() != n {
        return Err(shape_err!("{} labels for {n} logit rows", labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(shape_err!("label {bad} out of range for {classes} classes"));
    }
    let mut total = 0.0f64;
    let mut cotangent = Vec::with_capacity(n * classes);
    for (row, &label) in logits.data().chunks_exact(classes).zip(labels) {
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let log_sum: f32 = row.iter().map(|&z| (z - max).exp()).sum::<f32>().ln() + max;
        total += (log_sum - row[label]) as f64;
        for (c, &z) in row.iter().enumerate() {
            let p = (z - log_sum).exp();
            let target = if c == label { 1.0 } else { 0.0 };
            cotangent.push((p - target) / n as f32);
        }
    }
    Ok((
        (total / n as f64) as f32,
        Tensor::new(vec![n, classes], cotangent)?,
    ))
}
