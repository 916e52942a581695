use super::Tensor;
use crate::error::{shape_err, Result};

pub fn relu(input: &Tensor) -> Tensor {
    let data = input.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::new(input.shape().to_vec(), data).expect("shape preserved")
}

/// Passes the cotangent where the forward input was strictly positive.
/// The derivative at exactly zero is taken to be zero.
pub fn relu_backward(input: &Tensor, cotangent: &Tensor) -> Result<Tensor> {
    same_shape(input, cotangent)?;
    let data = input
        .data()
        .iter()
        .zip(cotangent.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(input.shape().to_vec(), data)
}

/// Elementwise sum, used by residual skip connections.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape(a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn add_backward(cotangent: &Tensor) -> (Tensor, Tensor) {
    (cotangent.clone(), cotangent.clone())
}

fn same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(shape_err!(
            "shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        ));
    }
    Ok(())
}
