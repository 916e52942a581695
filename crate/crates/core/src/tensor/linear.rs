use super::gemm::matmul;
use super::Tensor;
use crate::error::{shape_err, Result};

#[derive(Clone, Debug)]
pub struct LinearGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Vec<f32>,
}

fn dims(input: &Tensor, weight: &Tensor) -> Result<(usize, usize, usize)> {
    let (n, f) = input.dims2()?;
    let (o, wf) = weight.dims2()?;
    if f != wf {
        return Err(shape_err!(
            "linear weight expects {wf} features but input has {f}"
        ));
    }
    Ok((n, f, o))
}

/// `input (N×F) · weightᵀ (F×O) + bias`.
pub fn linear(input: &Tensor, weight: &Tensor, bias: &[f32]) -> Result<Tensor> {
    let (n, f, o) = dims(input, weight)?;
    if bias.len() != o {
        return Err(shape_err!(
            "bias has {} entries for {o} outputs",
            bias.len()
        ));
    }
    let mut out = vec![0.0f32; n * o];
    for row in out.chunks_exact_mut(o) {
        row.copy_from_slice(bias);
    }
    matmul(
        n,
        f,
        o,
        input.data(),
        false,
        weight.data(),
        true,
        &mut out,
        true,
    );
    Tensor::new(vec![n, o], out)
}

fn check_cotangent(n: usize, o: usize, cotangent: &Tensor) -> Result<()> {
    if cotangent.shape() != [n, o] {
        return Err(shape_err!(
            "cotangent {:?} does not match linear output {:?}",
            cotangent.shape(),
            [n, o]
        ));
    }
    Ok(())
}

pub fn linear_backward_input(
    input: &Tensor,
    weight: &Tensor,
    cotangent: &Tensor,
) -> Result<Tensor> {
    let (n, f, o) = dims(input, weight)?;
    check_cotangent(n, o, cotangent)?;
    let mut dx = vec![0.0f32; n * f];
    matmul(
        n,
        o,
        f,
        cotangent.data(),
        false,
        weight.data(),
        false,
        &mut dx,
        false,
    );
    Tensor::new(vec![n, f], dx)
}

pub fn linear_backward(input: &Tensor, weight: &Tensor, cotangent: &Tensor) -> Result<LinearGrads> {
    let (n, f, o) = dims(input, weight)?;
    check_cotangent(n, o, cotangent)?;
    let mut dw = vec![0.0f32; o * f];
    matmul(
        o,
        n,
        f,
        cotangent.data(),
        true,
        input.data(),
        false,
        &mut dw,
        false,
    );
    let mut db = vec![0.0f32; o];
    for row in cotangent.data().chunks_exact(o) {
        for (acc, g) in db.iter_mut().zip(row) {
            *acc += g;
        }
    }
    Ok(LinearGrads {
        input: linear_backward_input(input, weight, cotangent)?,
        weight: Tensor::new(vec![o, f], dw)?,
        bias: db,
    })
}
