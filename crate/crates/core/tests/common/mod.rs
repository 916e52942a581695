//! Test-only oracles shared by the integration suites.
//!
//! The reference network here re-implements every layer with plain `f64`
//! loops, independent of the crate's kernels. Central differences are taken
//! of the reference, so the oracle carries no `f32` rounding noise.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use salmap::nn::{LayerSpec, Model, ModelConfig};
use salmap::saliency::{GradientCube, MapKind, SignMode};
use salmap::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f32, hi: f32) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..len).map(|_| rng.gen_range(lo..hi)).collect(),
    )
    .unwrap()
}

pub fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// An `f64` activation in NCHW (or N×F with `h = w = 1`).
#[derive(Clone, Debug)]
pub struct Act {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub v: Vec<f64>,
}

impl Act {
    pub fn from_tensor(t: &Tensor) -> Self {
        let s = t.shape();
        let (n, c, h, w) = match *s {
            [n, c, h, w] => (n, c, h, w),
            [n, f] => (n, f, 1, 1),
            _ => panic!("unsupported shape {s:?}"),
        };
        Self {
            n,
            c,
            h,
            w,
            v: to_f64(t.data()),
        }
    }

    fn at(&self, b: usize, c: usize, i: usize, j: usize) -> f64 {
        self.v[((b * self.c + c) * self.h + i) * self.w + j]
    }
}

/// Direct six-loop cross-correlation.
pub fn ref_conv(
    x: &Act,
    w: &[f64],
    wshape: [usize; 4],
    bias: &[f64],
    stride: usize,
    padding: usize,
) -> Act {
    let [o, c, kh, kw] = wshape;
    assert_eq!(c, x.c);
    let oh = (x.h + 2 * padding - kh) / stride + 1;
    let ow = (x.w + 2 * padding - kw) / stride + 1;
    let mut v = vec![0.0f64; x.n * o * oh * ow];
    for b in 0..x.n {
        for oc in 0..o {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = bias[oc];
                    for ic in 0..c {
                        for ki in 0..kh {
                            for kj in 0..kw {
                                let r = (i * stride + ki) as isize - padding as isize;
                                let col = (j * stride + kj) as isize - padding as isize;
                                if r < 0 || col < 0 || r >= x.h as isize || col >= x.w as isize {
                                    continue;
                                }
                                acc += x.at(b, ic, r as usize, col as usize)
                                    * w[((oc * c + ic) * kh + ki) * kw + kj];
                            }
                        }
                    }
                    v[((b * o + oc) * oh + i) * ow + j] = acc;
                }
            }
        }
    }
    Act {
        n: x.n,
        c: o,
        h: oh,
        w: ow,
        v,
    }
}

pub fn naive_conv2d(
    x: &Tensor,
    w: &Tensor,
    bias: &[f32],
    stride: usize,
    padding: usize,
) -> Vec<f64> {
    let ws = w.shape();
    ref_conv(
        &Act::from_tensor(x),
        &to_f64(w.data()),
        [ws[0], ws[1], ws[2], ws[3]],
        &to_f64(bias),
        stride,
        padding,
    )
    .v
}

pub fn ref_pool(x: &Act, window: usize, stride: usize, max: bool) -> Act {
    let oh = (x.h - window) / stride + 1;
    let ow = (x.w - window) / stride + 1;
    let mut v = Vec::with_capacity(x.n * x.c * oh * ow);
    for b in 0..x.n {
        for c in 0..x.c {
            for i in 0..oh {
                for j in 0..ow {
                    let cells = (0..window)
                        .flat_map(|di| (0..window).map(move |dj| (di, dj)))
                        .map(|(di, dj)| x.at(b, c, i * stride + di, j * stride + dj));
                    v.push(if max {
                        cells.fold(f64::NEG_INFINITY, f64::max)
                    } else {
                        cells.sum::<f64>() / (window * window) as f64
                    });
                }
            }
        }
    }
    Act {
        n: x.n,
        c: x.c,
        h: oh,
        w: ow,
        v,
    }
}

pub fn ref_relu(x: &Act) -> Act {
    Act {
        v: x.v.iter().map(|v| v.max(0.0)).collect(),
        ..x.clone()
    }
}

/// `x (N×F) · wᵀ + b` with `w` stored `O×F`.
pub fn ref_linear(x: &Act, w: &[f64], out: usize, bias: &[f64]) -> Act {
    let f = x.c * x.h * x.w;
    let mut v = Vec::with_capacity(x.n * out);
    for b in 0..x.n {
        for o in 0..out {
            let row = &x.v[b * f..(b + 1) * f];
            v.push(
                bias[o]
                    + row
                        .iter()
                        .zip(&w[o * f..(o + 1) * f])
                        .map(|(a, c)| a * c)
                        .sum::<f64>(),
            );
        }
    }
    Act {
        n: x.n,
        c: out,
        h: 1,
        w: 1,
        v,
    }
}

/// Parameters of a model converted to `f64`, in store order.
pub fn model_params_f64(model: &Model) -> Vec<Vec<f64>> {
    model
        .params()
        .params()
        .iter()
        .map(|p| to_f64(p.value().data()))
        .collect()
}

/// Logits (`N × classes`, flat) of `model`'s architecture with the given
/// `f64` parameters, evaluated by the reference layers.
pub fn ref_logits(model: &Model, params: &[Vec<f64>], input: &Act) -> Vec<f64> {
    let shapes: Vec<Vec<usize>> = model
        .params()
        .params()
        .iter()
        .map(|p| p.value().shape().to_vec())
        .collect();
    let w4 = |i: usize| -> [usize; 4] {
        let s = &shapes[i];
        [s[0], s[1], s[2], s[3]]
    };
    let mut next = 0;
    let mut x = input.clone();
    for layer in &model.config().layers {
        x = match *layer {
            LayerSpec::Conv {
                stride, padding, ..
            } => {
                next += 2;
                ref_conv(
                    &x,
                    &params[next - 2],
                    w4(next - 2),
                    &params[next - 1],
                    stride,
                    padding,
                )
            }
            LayerSpec::MaxPool(g) => ref_pool(&x, g.window, g.stride, true),
            LayerSpec::AvgPool(g) => ref_pool(&x, g.window, g.stride, false),
            LayerSpec::Relu => ref_relu(&x),
            LayerSpec::Flatten => Act {
                c: x.c * x.h * x.w,
                h: 1,
                w: 1,
                ..x
            },
            LayerSpec::Linear { units } => {
                next += 2;
                ref_linear(&x, &params[next - 2], units, &params[next - 1])
            }
            LayerSpec::Residual { kernel } => {
                next += 4;
                let p = kernel / 2;
                let h1 = ref_conv(&x, &params[next - 4], w4(next - 4), &params[next - 3], 1, p);
                let h2 = ref_conv(
                    &ref_relu(&h1),
                    &params[next - 2],
                    w4(next - 2),
                    &params[next - 1],
                    1,
                    p,
                );
                let sum = Act {
                    v: x.v.iter().zip(&h2.v).map(|(a, b)| a + b).collect(),
                    ..x.clone()
                };
                ref_relu(&sum)
            }
        };
    }
    x.v
}

/// Outcome of comparing an analytic gradient with central differences.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
}

/// Central differences `(f(x+h) − f(x−h)) / 2h` of a scalar `f64` function,
/// compared with `analytic` entry by entry.
///
/// The relative error of an entry is `|a − n| / max(|a|, |n|, floor)` with
/// `floor = 1e-3 · max_j |n_j|`: entries a thousand times smaller than the
/// largest are judged on that scale. An entry whose one-sided differences
/// disagree straddles a kink (ReLU at zero, a max-pool tie) and is skipped.
pub fn grad_check(f: impl Fn(&[f64]) -> f64, x: &[f64], analytic: &[f32], h: f64) -> GradCheck {
    assert_eq!(x.len(), analytic.len());
    let f0 = f(x);
    let mut probe = x.to_vec();
    let mut samples = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        samples.push(((fp - fm) / (2.0 * h), (fp - f0) / h, (f0 - fm) / h));
    }
    let scale = samples.iter().fold(0.0f64, |m, s| m.max(s.0.abs()));
    let floor = (1e-3 * scale).max(1e-12);
    let mut out = GradCheck {
        max_rel_err: 0.0,
        checked: 0,
        skipped_kinks: 0,
    };
    for (i, &(central, forward, backward)) in samples.iter().enumerate() {
        if (forward - backward).abs() > 1e-6 * forward.abs().max(backward.abs()).max(floor) {
            out.skipped_kinks += 1;
            continue;
        }
        let a = analytic[i] as f64;
        let rel = (a - central).abs() / a.abs().max(central.abs()).max(floor);
        out.max_rel_err = out.max_rel_err.max(rel);
        out.checked += 1;
    }
    out
}

/// A random model of at most three layers (flatten excluded), the last a
/// linear classifier head, over an input of at most 3×8×8.
pub fn random_tiny_config(r: &mut impl Rng) -> ModelConfig {
    loop {
        let input = (r.gen_range(1..=3), r.gen_range(3..=8), r.gen_range(3..=8));
        let mut layers = Vec::new();
        for _ in 0..r.gen_range(0..=2) {
            layers.push(match r.gen_range(0..5) {
                0 | 1 => LayerSpec::Conv {
                    out_channels: r.gen_range(1..=4),
                    kernel: r.gen_range(1..=3),
                    stride: r.gen_range(1..=2),
                    padding: r.gen_range(0..=1),
                },
                2 => LayerSpec::Relu,
                3 => {
                    if r.gen_bool(0.5) {
                        LayerSpec::maxpool(2)
                    } else {
                        LayerSpec::avgpool(2)
                    }
                }
                _ => LayerSpec::Residual { kernel: 3 },
            });
        }
        layers.push(LayerSpec::Flatten);
        layers.push(LayerSpec::Linear {
            units: r.gen_range(1..=4),
        });
        let num_classes = match layers.last() {
            Some(LayerSpec::Linear { units }) => *units,
            _ => unreachable!(),
        };
        let config = ModelConfig {
            input,
            num_classes,
            layers,
        };
        if config.shapes().is_ok() {
            return config;
        }
    }
}

pub fn layer_list(config: &ModelConfig) -> String {
    config
        .layers
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

/// Map values by explicit enumeration over channels and classes, reading the
/// cube through 4-D indices.
pub fn brute_force_map(cube: &GradientCube, kind: MapKind, mode: SignMode) -> Vec<f32> {
    let (classes, channels, h, w) = cube.dims();
    let v = cube.values().data();
    let at = |c: usize, k: usize, i: usize, j: usize| v[((c * channels + k) * h + i) * w + j];
    let pred = cube.predicted_class();
    let mut out = Vec::with_capacity(h * w);
    for i in 0..h {
        for j in 0..w {
            let mut best = f32::NEG_INFINITY;
            for k in 0..channels {
                let g = at(pred, k, i, j);
                let mut is_max = true;
                let mut is_min = true;
                for c in 0..classes {
                    if at(c, k, i, j) > g {
                        is_max = false;
                    }
                    if at(c, k, i, j) < g {
                        is_min = false;
                    }
                }
                let strict = mode == SignMode::Strict;
                let value = match kind {
                    MapKind::Original => g.abs(),
                    MapKind::Positive => {
                        if g > 0.0 {
                            g
                        } else {
                            0.0
                        }
                    }
                    MapKind::Negative => {
                        if g < 0.0 {
                            -g
                        } else {
                            0.0
                        }
                    }
                    MapKind::Active if !is_max => 0.0,
                    MapKind::Active if strict => {
                        if g > 0.0 {
                            g
                        } else {
                            0.0
                        }
                    }
                    MapKind::Active => g,
                    MapKind::Inactive if !is_min => 0.0,
                    MapKind::Inactive if strict => {
                        if g < 0.0 {
                            -g
                        } else {
                            0.0
                        }
                    }
                    MapKind::Inactive => g,
                };
                if value > best {
                    best = value;
                }
            }
            out.push(best);
        }
    }
    out
}

/// A random cube with up to 3 classes, 3 channels and 4×4 pixels. About a
/// third of the cubes draw from a coarse grid so that ties between classes,
/// zeros and signed zeros occur.
pub fn random_cube(r: &mut ChaCha8Rng, image_id: u64) -> GradientCube {
    let classes = r.gen_range(1..=3);
    let coarse = r.gen_bool(0.35);
    let len = classes * 3 * 16;
    let values = (0..len)
        .map(|_| {
            if coarse {
                [-1.0, -0.5, -0.0, 0.0, 0.5, 1.0][r.gen_range(0..6)]
            } else {
                r.gen_range(-1.0f32..1.0)
            }
        })
        .collect();
    let values = Tensor::new(vec![classes, 3, 4, 4], values).unwrap();
    GradientCube::new(values, r.gen_range(0..classes), image_id).unwrap()
}
