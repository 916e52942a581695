use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ActShape, LayerSpec, ModelConfig};
use super::params::{Gradients, Param, ParamStore};
use crate::error::{shape_err, Result};
use crate::tensor::{
    self, avgpool2d, avgpool2d_backward, conv2d_backward, conv2d_backward_input, conv2d_forward,
    linear, linear_backward, linear_backward_input, maxpool2d, maxpool2d_backward, relu,
    relu_backward, Conv2dTrace, MaxPoolIndices, PoolGeometry, Tensor,
};

/// Logits of one image and the class they select.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f32>,
    pub predicted_class: usize,
}

impl Prediction {
    pub fn from_logits(logits: Vec<f32>) -> Self {
        let predicted_class = argmax(&logits);
        Self {
            logits,
            predicted_class,
        }
    }
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy, Debug)]
struct ConvParams {
    weight: usize,
    bias: usize,
    stride: usize,
    padding: usize,
}

#[derive(Clone, Debug)]
enum Node {
    Conv(ConvParams),
    MaxPool(PoolGeometry),
    AvgPool(PoolGeometry),
    Relu,
    Flatten,
    Linear {
        weight: usize,
        bias: usize,
    },
    Residual {
        first: ConvParams,
        second: ConvParams,
    },
}

// one trace per layer, so the size spread between variants is immaterial
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug)]
enum LayerTrace {
    Conv(Conv2dTrace),
    MaxPool(MaxPoolIndices),
    AvgPool {
        input_shape: Vec<usize>,
        geom: PoolGeometry,
    },
    Relu {
        input: Tensor,
    },
    Flatten {
        input_shape: Vec<usize>,
    },
    Linear {
        input: Tensor,
    },
    Residual {
        first: Conv2dTrace,
        hidden: Tensor,
        second: Conv2dTrace,
        sum: Tensor,
    },
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    layers: Vec<LayerTrace>,
    batch: usize,
}

impl ForwardTrace {
    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// A sequential network: its configuration, resolved layer plan and weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
}

fn kaiming_uniform(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt() as f32;
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape and length agree")
}

fn push_conv(
    params: &mut Vec<Param>,
    rng: &mut ChaCha8Rng,
    name: String,
    out_c: usize,
    in_c: usize,
    kernel: usize,
) {
    let shape = [out_c, in_c, kernel, kernel];
    params.push(Param::new(
        format!("{name}.weight"),
        kaiming_uniform(rng, &shape, in_c * kernel * kernel),
    ));
    params.push(Param::new(format!("{name}.bias"), Tensor::zeros(&[out_c])));
}

impl Model {
    /// Validates the configuration and draws Kaiming-uniform (fan-in)
    /// weights from a ChaCha8 stream seeded with `seed`. Biases start at zero.
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        let shapes = config.shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let (c, h, w) = config.input;
        let mut prev = ActShape::Image { c, h, w };
        for (index, (layer, shape)) in config.layers.iter().zip(&shapes).enumerate() {
            match (layer, prev) {
                (
                    LayerSpec::Conv {
                        out_channels,
                        kernel,
                        ..
                    },
                    ActShape::Image { c, .. },
                ) => {
                    push_conv(
                        &mut params,
                        &mut rng,
                        format!("{index}.conv"),
                        *out_channels,
                        c,
                        *kernel,
                    );
                }
                (LayerSpec::Residual { kernel }, ActShape::Image { c, .. }) => {
                    push_conv(
                        &mut params,
                        &mut rng,
                        format!("{index}.residual.conv1"),
                        c,
                        c,
                        *kernel,
                    );
                    push_conv(
                        &mut params,
                        &mut rng,
                        format!("{index}.residual.conv2"),
                        c,
                        c,
                        *kernel,
                    );
                }
                (LayerSpec::Linear { units }, ActShape::Flat(f)) => {
                    params.push(Param::new(
                        format!("{index}.linear.weight"),
                        kaiming_uniform(&mut rng, &[*units, f], f),
                    ));
                    params.push(Param::new(
                        format!("{index}.linear.bias"),
                        Tensor::zeros(&[*units]),
                    ));
                }
                _ => {}
            }
            prev = *shape;
        }
        Ok(Self {
            config,
            params: ParamStore::new(params),
        })
    }

    /// Wraps existing parameters, checking names and shapes against a
    /// freshly planned model.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        let reference = Self::build(config, 0)?;
        if reference.params.len() != params.len() {
            return Err(shape_err!(
                "configuration needs {} parameter tensors, got {}",
                reference.params.len(),
                params.len()
            ));
        }
        for (want, got) in reference.params.params().iter().zip(params.params()) {
            if want.name() != got.name() || want.value().shape() != got.value().shape() {
                return Err(shape_err!(
                    "expected parameter {} {:?}, got {} {:?}",
                    want.name(),
                    want.value().shape(),
                    got.name(),
                    got.value().shape()
                ));
            }
        }
        Ok(Self {
            config: reference.config,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn plan(&self) -> Vec<Node> {
        let mut next = 0;
        let mut take = || {
            next += 2;
            (next - 2, next - 1)
        };
        self.config
            .layers
            .iter()
            .map(|layer| match *layer {
                LayerSpec::Conv {
                    stride, padding, ..
                } => {
                    let (weight, bias) = take();
                    Node::Conv(ConvParams {
                        weight,
                        bias,
                        stride,
                        padding,
                    })
                }
                LayerSpec::Residual { kernel } => {
                    let (w1, b1) = take();
                    let (w2, b2) = take();
                    let padding = kernel / 2;
                    Node::Residual {
                        first: ConvParams {
                            weight: w1,
                            bias: b1,
                            stride: 1,
                            padding,
                        },
                        second: ConvParams {
                            weight: w2,
                            bias: b2,
                            stride: 1,
                            padding,
                        },
                    }
                }
                LayerSpec::Linear { .. } => {
                    let (weight, bias) = take();
                    Node::Linear { weight, bias }
                }
                LayerSpec::MaxPool(g) => Node::MaxPool(g),
                LayerSpec::AvgPool(g) => Node::AvgPool(g),
                LayerSpec::Relu => Node::Relu,
                LayerSpec::Flatten => Node::Flatten,
            })
            .collect()
    }

    fn conv(&self, p: ConvParams, x: &Tensor) -> Result<(Tensor, Conv2dTrace)> {
        conv2d_forward(
            x,
            self.params.get(p.weight),
            self.params.get(p.bias).data(),
            p.stride,
            p.padding,
        )
    }

    fn check_input(&self, images: &Tensor) -> Result<usize> {
        let (n, c, h, w) = images.dims4()?;
        if (c, h, w) != self.config.input {
            return Err(shape_err!(
                "model expects {:?} images, got {:?}",
                self.config.input,
                (c, h, w)
            ));
        }
        Ok(n)
    }

    /// Runs the network on an NCHW batch, keeping the activations needed by
    /// [`Model::backward`].
    pub fn forward(&self, images: &Tensor) -> Result<(Vec<Prediction>, ForwardTrace)> {
        let batch = self.check_input(images)?;
        let mut x = images.clone();
        let mut layers = Vec::with_capacity(self.config.layers.len());
        for node in self.plan() {
            let (y, trace) = match node {
                Node::Conv(p) => {
                    let (y, t) = self.conv(p, &x)?;
                    (y, LayerTrace::Conv(t))
                }
                Node::MaxPool(g) => {
                    let (y, idx) = maxpool2d(&x, g)?;
                    (y, LayerTrace::MaxPool(idx))
                }
                Node::AvgPool(geom) => (
                    avgpool2d(&x, geom)?,
                    LayerTrace::AvgPool {
                        input_shape: x.shape().to_vec(),
                        geom,
                    },
                ),
                Node::Relu => (relu(&x), LayerTrace::Relu { input: x }),
                Node::Flatten => {
                    let input_shape = x.shape().to_vec();
                    let features = x.len() / batch;
                    (
                        x.reshape(vec![batch, features])?,
                        LayerTrace::Flatten { input_shape },
                    )
                }
                Node::Linear { weight, bias } => (
                    linear(&x, self.params.get(weight), self.params.get(bias).data())?,
                    LayerTrace::Linear { input: x },
                ),
                Node::Residual { first, second } => {
                    let (h1, first_trace) = self.conv(first, &x)?;
                    let hidden = h1;
                    let (h2, second_trace) = self.conv(second, &relu(&hidden))?;
                    let sum = tensor::add(&x, &h2)?;
                    (
                        relu(&sum),
                        LayerTrace::Residual {
                            first: first_trace,
                            hidden,
                            second: second_trace,
                            sum,
                        },
                    )
                }
            };
            layers.push(trace);
            x = y;
        }
        let classes = self.config.num_classes;
        let predictions = x
            .data()
            .chunks_exact(classes)
            .map(|row| Prediction::from_logits(row.to_vec()))
            .collect();
        Ok((predictions, ForwardTrace { layers, batch }))
    }

    /// Logits as an `N × classes` tensor.
    pub fn logits(&self, images: &Tensor) -> Result<Tensor> {
        let (predictions, trace) = self.forward(images)?;
        let data = predictions.into_iter().flat_map(|p| p.logits).collect();
        Tensor::new(vec![trace.batch, self.config.num_classes], data)
    }

    /// Backpropagates a cotangent over the logits. Returns the gradient
    /// with respect to the input images and, if requested, the parameters.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        logit_cotangent: &Tensor,
        want_param_grads: bool,
    ) -> Result<(Tensor, Option<Gradients>)> {
        let expected = [trace.batch, self.config.num_classes];
        if logit_cotangent.shape() != expected {
            return Err(shape_err!(
                "logit cotangent {:?} does not match {:?}",
                logit_cotangent.shape(),
                expected
            ));
        }
        let mut grads = want_param_grads.then(|| self.params.zero_gradients());
        let mut g = logit_cotangent.clone();
        let plan = self.plan();
        for (node, layer) in plan.iter().zip(&trace.layers).rev() {
            g = match (node, layer) {
                (Node::Conv(p), LayerTrace::Conv(t)) => self.conv_back(*p, t, &g, &mut grads)?,
                (Node::MaxPool(_), LayerTrace::MaxPool(idx)) => maxpool2d_backward(idx, &g)?,
                (Node::AvgPool(_), LayerTrace::AvgPool { input_shape, geom }) => {
                    avgpool2d_backward(input_shape, *geom, &g)?
                }
                (Node::Relu, LayerTrace::Relu { input }) => relu_backward(input, &g)?,
                (Node::Flatten, LayerTrace::Flatten { input_shape }) => {
                    g.reshape(input_shape.clone())?
                }
                (Node::Linear { weight, bias }, LayerTrace::Linear { input }) => {
                    let w = self.params.get(*weight);
                    match grads.as_mut() {
                        Some(acc) => {
                            let lg = linear_backward(input, w, &g)?;
                            acc.0[*weight] = lg.weight;
                            acc.0[*bias] = Tensor::new(vec![lg.bias.len()], lg.bias)?;
                            lg.input
                        }
                        None => linear_backward_input(input, w, &g)?,
                    }
                }
                (
                    Node::Residual { first, second },
                    LayerTrace::Residual {
                        first: t1,
                        hidden,
                        second: t2,
                        sum,
                    },
                ) => {
                    let through_sum = relu_backward(sum, &g)?;
                    let (skip, branch) = tensor::add_backward(&through_sum);
                    let g2 = self.conv_back(*second, t2, &branch, &mut grads)?;
                    let g1 = relu_backward(hidden, &g2)?;
                    let g0 = self.conv_back(*first, t1, &g1, &mut grads)?;
                    tensor::add(&skip, &g0)?
                }
                _ => unreachable!("trace was produced by this model's plan"),
            };
        }
        Ok((g, grads))
    }

    fn conv_back(
        &self,
        p: ConvParams,
        trace: &Conv2dTrace,
        g: &Tensor,
        grads: &mut Option<Gradients>,
    ) -> Result<Tensor> {
        let w = self.params.get(p.weight);
        match grads.as_mut() {
            Some(acc) => {
                let cg = conv2d_backward(trace, w, g)?;
                acc.0[p.weight] = cg.weight;
                acc.0[p.bias] = Tensor::new(vec![cg.bias.len()], cg.bias)?;
                Ok(cg.input)
            }
            None => conv2d_backward_input(trace, w, g),
        }
    }

    /// Gradient of `Σ cotangent · logits` with respect to the input images.
    /// With a one-hot cotangent at class `c` this is `∂S_c/∂I`.
    pub fn backward_input(&self, trace: &ForwardTrace, logit_cotangent: &Tensor) -> Result<Tensor> {
        Ok(self.backward(trace, logit_cotangent, false)?.0)
    }
}
