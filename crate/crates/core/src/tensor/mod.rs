//! Dense row-major `f32` tensors and the kernels models are assembled from.
//!
//! Every kernel is a pure function of its inputs. Forward kernels that need
//! state for their backward pass return a small trace value next to the
//! output.

mod activation;
mod conv;
mod gemm;
mod linear;
mod pool;

pub use activation::{add, add_backward, relu, relu_backward};
pub use conv::{conv2d_backward, conv2d_backward_input, conv2d_forward, Conv2dGrads, Conv2dTrace};
pub use linear::{linear, linear_backward, linear_backward_input, LinearGrads};
pub use pool::{
    avgpool2d, avgpool2d_backward, maxpool2d, maxpool2d_backward, MaxPoolIndices, PoolGeometry,
};

use crate::error::{shape_err, Result};

/// Dense N-dimensional array of `f32`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(shape_err!(
                "dimension sizes must be positive, got {shape:?}"
            ));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(shape_err!(
                "shape {shape:?} holds {expected} values but {} were given",
                data.len()
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f32) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Same data under a new shape with the same element count.
    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.shape)
    }

    /// Stacks equally shaped tensors along a new leading axis.
    pub fn stack(items: &[Tensor]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| shape_err!("cannot stack zero tensors"))?;
        let mut data = Vec::with_capacity(first.len() * items.len());
        for t in items {
            if t.shape != first.shape {
                return Err(shape_err!(
                    "cannot stack {:?} with {:?}",
                    t.shape,
                    first.shape
                ));
            }
            data.extend_from_slice(&t.data);
        }
        let mut shape = vec![items.len()];
        shape.extend_from_slice(&first.shape);
        Self::new(shape, data)
    }

    /// The `index`-th slice along the leading axis.
    pub fn slice_outer(&self, index: usize) -> Result<Tensor> {
        let outer = *self
            .shape
            .first()
            .ok_or_else(|| shape_err!("cannot slice a rank-0 tensor"))?;
        if index >= outer {
            return Err(shape_err!("index {index} out of range for axis of {outer}"));
        }
        let inner: Vec<usize> = if self.shape.len() == 1 {
            vec![1]
        } else {
            self.shape[1..].to_vec()
        };
        let step: usize = inner.iter().product();
        Tensor::new(inner, self.data[index * step..(index + 1) * step].to_vec())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Destructures an NCHW tensor.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match *self.shape.as_slice() {
            [n, c, h, w] => Ok((n, c, h, w)),
            _ => Err(shape_err!(
                "expected a rank-4 NCHW tensor, got {:?}",
                self.shape
            )),
        }
    }

    pub fn dims2(&self) -> Result<(usize, usize)> {
        match *self.shape.as_slice() {
            [r, c] => Ok((r, c)),
            _ => Err(shape_err!("expected a rank-2 tensor, got {:?}", self.shape)),
        }
    }
}
