use super::gemm::matmul;
use super::Tensor;
use crate::error::{shape_err, Result};

/// What `conv2d_backward` needs from the forward pass.
#[derive(Clone, Debug)]
pub struct Conv2dTrace {
    input: Tensor,
    weight_shape: [usize; 4],
    stride: usize,
    padding: usize,
    out_hw: (usize, usize),
}

impl Conv2dTrace {
    pub fn input(&self) -> &Tensor {
        &self.input
    }

    pub fn output_shape(&self) -> [usize; 4] {
        let n = self.input.shape()[0];
        [n, self.weight_shape[0], self.out_hw.0, self.out_hw.1]
    }
}

#[derive(Clone, Debug)]
pub struct Conv2dGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Vec<f32>,
}

#[derive(Clone, Copy)]
struct Geometry {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn patch_len(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn columns(&self) -> usize {
        self.n * self.oh * self.ow
    }

    /// For each `(kernel row, output row)` pair, the input row read, if any.
    fn source(&self, k: usize, o: usize, extent: usize) -> Option<usize> {
        let pos = (o * self.stride + k) as isize - self.padding as isize;
        (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
    }
}

fn geometry(input: &Tensor, weight: &Tensor, stride: usize, padding: usize) -> Result<Geometry> {
    let (n, c, h, w) = input.dims4()?;
    let (_, wc, kh, kw) = weight.dims4()?;
    if stride == 0 {
        return Err(shape_err!("convolution stride must be at least 1"));
    }
    if wc != c {
        return Err(shape_err!(
            "convolution weight expects {wc} input channels but input has {c}"
        ));
    }
    if h + 2 * padding < kh || w + 2 * padding < kw {
        return Err(shape_err!(
            "kernel {kh}x{kw} larger than padded input {}x{}",
            h + 2 * padding,
            w + 2 * padding
        ));
    }
    Ok(Geometry {
        n,
        c,
        h,
        w,
        kh,
        kw,
        stride,
        padding,
        oh: (h + 2 * padding - kh) / stride + 1,
        ow: (w + 2 * padding - kw) / stride + 1,
    })
}

/// Unfolds the batch into a `(C·KH·KW) × (N·OH·OW)` patch matrix.
fn im2col(x: &[f32], g: Geometry) -> Vec<f32> {
    let cols = g.columns();
    let ohw = g.oh * g.ow;
    let mut out = vec![0.0f32; g.patch_len() * cols];
    for ch in 0..g.c {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ch * g.kh + ki) * g.kw + kj;
                let dst_row = &mut out[row * cols..(row + 1) * cols];
                for img in 0..g.n {
                    let plane = &x[(img * g.c + ch) * g.h * g.w..][..g.h * g.w];
                    let dst = &mut dst_row[img * ohw..(img + 1) * ohw];
                    for oi in 0..g.oh {
                        let Some(si) = g.source(ki, oi, g.h) else {
                            continue;
                        };
                        for oj in 0..g.ow {
                            if let Some(sj) = g.source(kj, oj, g.w) {
                                dst[oi * g.ow + oj] = plane[si * g.w + sj];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Folds a patch matrix back onto the input layout, summing overlaps.
fn col2im(cols: &[f32], g: Geometry) -> Vec<f32> {
    let ncols = g.columns();
    let ohw = g.oh * g.ow;
    let mut x = vec![0.0f32; g.n * g.c * g.h * g.w];
    for ch in 0..g.c {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ch * g.kh + ki) * g.kw + kj;
                let src_row = &cols[row * ncols..(row + 1) * ncols];
                for img in 0..g.n {
                    let plane = &mut x[(img * g.c + ch) * g.h * g.w..][..g.h * g.w];
                    let src = &src_row[img * ohw..(img + 1) * ohw];
                    for oi in 0..g.oh {
                        let Some(si) = g.source(ki, oi, g.h) else {
                            continue;
                        };
                        for oj in 0..g.ow {
                            if let Some(sj) = g.source(kj, oj, g.w) {
                                plane[si * g.w + sj] += src[oi * g.ow + oj];
                            }
                        }
                    }
                }
            }
        }
    }
    x
}

/// 2-D cross-correlation (no kernel flip) of an NCHW batch with OIHW
/// filters, plus a per-output-channel bias.
pub fn conv2d_forward(
    input: &Tensor,
    weight: &Tensor,
    bias: &[f32],
    stride: usize,
    padding: usize,
) -> Result<(Tensor, Conv2dTrace)> {
    let g = geometry(input, weight, stride, padding)?;
    let out_c = weight.shape()[0];
    if bias.len() != out_c {
        return Err(shape_err!(
            "bias has {} entries for {out_c} output channels",
            bias.len()
        ));
    }
    let cols = im2col(input.data(), g);
    let ncols = g.columns();
    let mut prod = vec![0.0f32; out_c * ncols];
    matmul(
        out_c,
        g.patch_len(),
        ncols,
        weight.data(),
        false,
        &cols,
        false,
        &mut prod,
        false,
    );

    // [O][N·OH·OW] -> [N][O][OH·OW]
    let ohw = g.oh * g.ow;
    let mut out = vec![0.0f32; g.n * out_c * ohw];
    for o in 0..out_c {
        for img in 0..g.n {
            let src = &prod[o * ncols + img * ohw..][..ohw];
            let dst = &mut out[(img * out_c + o) * ohw..][..ohw];
            for (d, s) in dst.iter_mut().zip(src) {
                *d = s + bias[o];
            }
        }
    }
    let output = Tensor::new(vec![g.n, out_c, g.oh, g.ow], out)?;
    let ws = weight.shape();
    let trace = Conv2dTrace {
        input: input.clone(),
        weight_shape: [ws[0], ws[1], ws[2], ws[3]],
        stride,
        padding,
        out_hw: (g.oh, g.ow),
    };
    Ok((output, trace))
}

fn check_cotangent(trace: &Conv2dTrace, weight: &Tensor, cotangent: &Tensor) -> Result<Geometry> {
    if weight.shape() != trace.weight_shape {
        return Err(shape_err!(
            "weight {:?} does not match the traced {:?}",
            weight.shape(),
            trace.weight_shape
        ));
    }
    let expected = trace.output_shape();
    if cotangent.shape() != expected {
        return Err(shape_err!(
            "cotangent {:?} does not match convolution output {:?}",
            cotangent.shape(),
            expected
        ));
    }
    geometry(&trace.input, weight, trace.stride, trace.padding)
}

/// `[N][O][OH·OW] -> [O][N·OH·OW]`
fn channel_major(cot: &[f32], n: usize, out_c: usize, ohw: usize) -> Vec<f32> {
    let ncols = n * ohw;
    let mut out = vec![0.0f32; out_c * ncols];
    for img in 0..n {
        for o in 0..out_c {
            out[o * ncols + img * ohw..][..ohw]
                .copy_from_slice(&cot[(img * out_c + o) * ohw..][..ohw]);
        }
    }
    out
}

fn input_grad(weight: &Tensor, dout: &[f32], g: Geometry, out_c: usize) -> Result<Tensor> {
    let ncols = g.columns();
    let mut dcols = vec![0.0f32; g.patch_len() * ncols];
    matmul(
        g.patch_len(),
        out_c,
        ncols,
        weight.data(),
        true,
        dout,
        false,
        &mut dcols,
        false,
    );
    Tensor::new(vec![g.n, g.c, g.h, g.w], col2im(&dcols, g))
}

/// Gradients of a convolution with respect to its input, weight and bias.
pub fn conv2d_backward(
    trace: &Conv2dTrace,
    weight: &Tensor,
    cotangent: &Tensor,
) -> Result<Conv2dGrads> {
    let g = check_cotangent(trace, weight, cotangent)?;
    let out_c = trace.weight_shape[0];
    let ohw = g.oh * g.ow;
    let dout = channel_major(cotangent.data(), g.n, out_c, ohw);

    let cols = im2col(trace.input.data(), g);
    let mut dweight = vec![0.0f32; out_c * g.patch_len()];
    matmul(
        out_c,
        g.columns(),
        g.patch_len(),
        &dout,
        false,
        &cols,
        true,
        &mut dweight,
        false,
    );
    let dbias = dout
        .chunks_exact(g.columns())
        .map(|row| row.iter().sum())
        .collect();

    Ok(Conv2dGrads {
        input: input_grad(weight, &dout, g, out_c)?,
        weight: Tensor::new(weight.shape().to_vec(), dweight)?,
        bias: dbias,
    })
}

/// Input gradient only; skips the weight-gradient product.
pub fn conv2d_backward_input(
    trace: &Conv2dTrace,
    weight: &Tensor,
    cotangent: &Tensor,
) -> Result<Tensor> {
    let g = check_cotangent(trace, weight, cotangent)?;
    let out_c = trace.weight_shape[0];
    let dout = channel_major(cotangent.data(), g.n, out_c, g.oh * g.ow);
    input_grad(weight, &dout, g, out_c)
}
