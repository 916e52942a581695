use crate::error::{config_err, shape_err, Result};
use crate::tensor::Tensor;

/// A named trainable tensor with its AdamW moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    name: String,
    value: Tensor,
    first_moment: Tensor,
    second_moment: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        Self {
            name: name.into(),
            first_moment: value.zeros_like(),
            second_moment: value.zeros_like(),
            value,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut Tensor {
        &mut self.value
    }
}

/// AdamW hyperparameters. Defaults are the usual ones with learning rate
/// 0.001 and weight decay 0.01.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamW {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
    pub weight_decay: f32,
}

impl Default for AdamW {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Gradients aligned index-for-index with a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub Vec<Tensor>);

/// All trainable tensors of a model plus optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    step: u64,
}

impl ParamStore {
    pub fn new(params: Vec<Param>) -> Self {
        Self { params, step: 0 }
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn get(&self, index: usize) -> &Tensor {
        &self.params[index].value
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients(self.params.iter().map(|p| p.value.zeros_like()).collect())
    }

    /// One AdamW update with decoupled weight decay:
    ///
    /// ```text
    /// θ ← θ·(1 − lr·λ)
    /// m ← β₁·m + (1 − β₁)·g
    /// v ← β₂·v + (1 − β₂)·g²
    /// θ ← θ − lr · (m / (1 − β₁ᵗ)) / (√(v / (1 − β₂ᵗ)) + ε)
    /// ```
    pub fn adamw_step(&mut self, grads: &Gradients, opt: &AdamW) -> Result<()> {
        if grads.0.len() != self.params.len() {
            return Err(config_err!(
                "{} gradients for {} parameters",
                grads.0.len(),
                self.params.len()
            ));
        }
        for (p, g) in self.params.iter().zip(&grads.0) {
            if p.value.shape() != g.shape() {
                return Err(shape_err!(
                    "gradient {:?} does not match parameter {} {:?}",
                    g.shape(),
                    p.name,
                    p.value.shape()
                ));
            }
        }
        self.step += 1;
        let t = self.step as f64;
        let correction1 = (1.0 - (opt.beta1 as f64).powf(t)) as f32;
        let correction2 = (1.0 - (opt.beta2 as f64).powf(t)) as f32;
        let decay = 1.0 - opt.lr * opt.weight_decay;
        for (p, g) in self.params.iter_mut().zip(&grads.0) {
            let values = p.value.data_mut();
            let m = p.first_moment.data_mut();
            let v = p.second_moment.data_mut();
            for i in 0..values.len() {
                let gi = g.data()[i];
                m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * gi;
                v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * gi * gi;
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                values[i] = values[i] * decay - opt.lr * m_hat / (v_hat.sqrt() + opt.epsilon);
            }
        }
        Ok(())
    }
}
