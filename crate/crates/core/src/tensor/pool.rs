use super::Tensor;
use crate::error::{shape_err, Result};

/// Square pooling window with a stride; no padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolGeometry {
    pub window: usize,
    pub stride: usize,
}

impl PoolGeometry {
    pub fn new(window: usize, stride: usize) -> Self {
        Self { window, stride }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if self.window == 0 || self.stride == 0 {
            return Err(shape_err!("pooling window and stride must be at least 1"));
        }
        if h < self.window || w < self.window {
            return Err(shape_err!(
                "pooling window {} larger than spatial extent {h}x{w}",
                self.window
            ));
        }
        Ok((
            (h - self.window) / self.stride + 1,
            (w - self.window) / self.stride + 1,
        ))
    }
}

/// Flat input offsets of each pooled maximum, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct MaxPoolIndices {
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    argmax: Vec<usize>,
}

impl MaxPoolIndices {
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

/// Max pooling. Ties resolve to the first window position in row-major
/// order.
pub fn maxpool2d(input: &Tensor, geom: PoolGeometry) -> Result<(Tensor, MaxPoolIndices)> {
    let (n, c, h, w) = input.dims4()?;
    let (oh, ow) = geom.output_hw(h, w)?;
    let x = input.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oi in 0..oh {
            for oj in 0..ow {
                let mut best = base + oi * geom.stride * w + oj * geom.stride;
                for di in 0..geom.window {
                    for dj in 0..geom.window {
                        let idx = base + (oi * geom.stride + di) * w + oj * geom.stride + dj;
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    let output_shape = vec![n, c, oh, ow];
    Ok((
        Tensor::new(output_shape.clone(), out)?,
        MaxPoolIndices {
            input_shape: input.shape().to_vec(),
            output_shape,
            argmax,
        },
    ))
}

/// Routes each cotangent entry to the recorded argmax position.
pub fn maxpool2d_backward(indices: &MaxPoolIndices, cotangent: &Tensor) -> Result<Tensor> {
    if cotangent.shape() != indices.output_shape.as_slice() {
        return Err(shape_err!(
            "cotangent {:?} does not match max-pool output {:?}",
            cotangent.shape(),
            indices.output_shape
        ));
    }
    let mut grad = Tensor::zeros(&indices.input_shape);
    let g = grad.data_mut();
    for (&src, &dst) in cotangent.data().iter().zip(&indices.argmax) {
        g[dst] += src;
    }
    Ok(grad)
}

/// Average pooling; each output is the window mean.
pub fn avgpool2d(input: &Tensor, geom: PoolGeometry) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    let (oh, ow) = geom.output_hw(h, w)?;
    let x = input.data();
    let area = (geom.window * geom.window) as f32;
    let mut out = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oi in 0..oh {
            for oj in 0..ow {
                let mut sum = 0.0f32;
                for di in 0..geom.window {
                    let row = base + (oi * geom.stride + di) * w + oj * geom.stride;
                    sum += x[row..row + geom.window].iter().sum::<f32>();
                }
                out.push(sum / area);
            }
        }
    }
    Tensor::new(vec![n, c, oh, ow], out)
}

/// Spreads each cotangent entry uniformly (divided by window²) over its
/// window.
pub fn avgpool2d_backward(
    input_shape: &[usize],
    geom: PoolGeometry,
    cotangent: &Tensor,
) -> Result<Tensor> {
    let [n, c, h, w] = *input_shape else {
        return Err(shape_err!(
            "expected an NCHW input shape, got {input_shape:?}"
        ));
    };
    let (oh, ow) = geom.output_hw(h, w)?;
    if cotangent.shape() != [n, c, oh, ow] {
        return Err(shape_err!(
            "cotangent {:?} does not match avg-pool output {:?}",
            cotangent.shape(),
            [n, c, oh, ow]
        ));
    }
    let area = (geom.window * geom.window) as f32;
    let mut grad = Tensor::zeros(input_shape);
    let g = grad.data_mut();
    let cot = cotangent.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oi in 0..oh {
            for oj in 0..ow {
                let share = cot[(plane * oh + oi) * ow + oj] / area;
                for di in 0..geom.window {
                    let row = base + (oi * geom.stride + di) * w + oj * geom.stride;
                    for v in &mut g[row..row + geom.window] {
                        *v += share;
                    }
                }
            }
        }
    }
    Ok(grad)
}
