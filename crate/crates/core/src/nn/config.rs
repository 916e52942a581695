use std::fmt;
use std::str::FromStr;

use crate::error::{config_err, Error, Result};
use crate::tensor::PoolGeometry;

/// One layer of a sequential model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    MaxPool(PoolGeometry),
    AvgPool(PoolGeometry),
    Relu,
    Flatten,
    Linear {
        units: usize,
    },
    /// `relu(x + conv(relu(conv(x))))` with channel-preserving, same-size
    /// convolutions of the given odd kernel size.
    Residual {
        kernel: usize,
    },
}

impl LayerSpec {
    pub fn conv3x3(out_channels: usize) -> Self {
        LayerSpec::Conv {
            out_channels,
            kernel: 3,
            stride: 1,
            padding: 1,
        }
    }

    pub fn maxpool(window: usize) -> Self {
        LayerSpec::MaxPool(PoolGeometry::new(window, window))
    }

    pub fn avgpool(window: usize) -> Self {
        LayerSpec::AvgPool(PoolGeometry::new(window, window))
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                padding,
            } => write!(f, "conv({out_channels},k{kernel},s{stride},p{padding})"),
            LayerSpec::MaxPool(g) => write!(f, "maxpool({},s{})", g.window, g.stride),
            LayerSpec::AvgPool(g) => write!(f, "avgpool({},s{})", g.window, g.stride),
            LayerSpec::Relu => f.write_str("relu"),
            LayerSpec::Flatten => f.write_str("flatten"),
            LayerSpec::Linear { units } => write!(f, "linear({units})"),
            LayerSpec::Residual { kernel } => write!(f, "residual(k{kernel})"),
        }
    }
}

/// Activation shape between layers (batch axis excluded).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActShape {
    Image { c: usize, h: usize, w: usize },
    Flat(usize),
}

impl ActShape {
    pub fn numel(&self) -> usize {
        match *self {
            ActShape::Image { c, h, w } => c * h * w,
            ActShape::Flat(f) => f,
        }
    }
}

/// A sequential architecture, its input geometry and the class count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    /// `(channels, height, width)`
    pub input: (usize, usize, usize),
    pub num_classes: usize,
    pub layers: Vec<LayerSpec>,
}

impl ModelConfig {
    /// Three conv blocks (32, 64, 128 channels) pooled by max, average and
    /// max again, then a linear classifier.
    pub fn basic_cnn(input: (usize, usize, usize), num_classes: usize) -> Self {
        Self {
            input,
            num_classes,
            layers: vec![
                LayerSpec::conv3x3(32),
                LayerSpec::Relu,
                LayerSpec::maxpool(2),
                LayerSpec::conv3x3(64),
                LayerSpec::Relu,
                LayerSpec::avgpool(2),
                LayerSpec::conv3x3(128),
                LayerSpec::Relu,
                LayerSpec::maxpool(2),
                LayerSpec::Flatten,
                LayerSpec::Linear { units: num_classes },
            ],
        }
    }

    /// Conv stem, three residual blocks without normalization, global
    /// average pooling and a linear classifier.
    pub fn resnet_lite(input: (usize, usize, usize), num_classes: usize) -> Self {
        let (_, h, w) = input;
        Self {
            input,
            num_classes,
            layers: vec![
                LayerSpec::conv3x3(16),
                LayerSpec::Relu,
                LayerSpec::Residual { kernel: 3 },
                LayerSpec::Residual { kernel: 3 },
                LayerSpec::Residual { kernel: 3 },
                LayerSpec::AvgPool(PoolGeometry::new(h.min(w), h.min(w))),
                LayerSpec::Flatten,
                LayerSpec::Linear { units: num_classes },
            ],
        }
    }

    /// Two narrow conv blocks; fast enough for tests and smoke runs.
    pub fn tiny_cnn(input: (usize, usize, usize), num_classes: usize) -> Self {
        Self {
            input,
            num_classes,
            layers: vec![
                LayerSpec::conv3x3(8),
                LayerSpec::Relu,
                LayerSpec::maxpool(2),
                LayerSpec::conv3x3(16),
                LayerSpec::Relu,
                LayerSpec::avgpool(2),
                LayerSpec::Flatten,
                LayerSpec::Linear { units: num_classes },
            ],
        }
    }

    /// Shape after every layer, validating that consecutive layers chain
    /// and that the model ends in `num_classes` logits.
    pub fn shapes(&self) -> Result<Vec<ActShape>> {
        let (c, h, w) = self.input;
        if c == 0 || h == 0 || w == 0 {
            return Err(config_err!(
                "input shape {:?} has an empty axis",
                self.input
            ));
        }
        if self.num_classes == 0 {
            return Err(config_err!("a model needs at least one class"));
        }
        if self.layers.is_empty() {
            return Err(config_err!("model has no layers"));
        }
        let mut shape = ActShape::Image { c, h, w };
        let mut shapes = Vec::with_capacity(self.layers.len());
        for (index, layer) in self.layers.iter().enumerate() {
            shape = next_shape(shape, layer).map_err(|msg| {
                config_err!("layer {index} ({layer}) cannot follow {shape:?}: {msg}")
            })?;
            shapes.push(shape);
        }
        if shape != ActShape::Flat(self.num_classes) {
            return Err(config_err!(
                "final layer produces {shape:?} but {} class logits are required",
                self.num_classes
            ));
        }
        Ok(shapes)
    }
}

fn next_shape(shape: ActShape, layer: &LayerSpec) -> Result<ActShape, String> {
    let ActShape::Image { c, h, w } = shape else {
        return match layer {
            LayerSpec::Relu => Ok(shape),
            LayerSpec::Linear { units: 0 } => Err("zero units".into()),
            LayerSpec::Linear { units } => Ok(ActShape::Flat(*units)),
            _ => Err("layer needs an image-shaped input".into()),
        };
    };
    match *layer {
        LayerSpec::Conv {
            out_channels,
            kernel,
            stride,
            padding,
        } => {
            if out_channels == 0 || kernel == 0 || stride == 0 {
                return Err("channels, kernel and stride must be positive".into());
            }
            if h + 2 * padding < kernel || w + 2 * padding < kernel {
                return Err("kernel larger than padded input".into());
            }
            Ok(ActShape::Image {
                c: out_channels,
                h: (h + 2 * padding - kernel) / stride + 1,
                w: (w + 2 * padding - kernel) / stride + 1,
            })
        }
        LayerSpec::MaxPool(g) | LayerSpec::AvgPool(g) => {
            let (oh, ow) = g.output_hw(h, w).map_err(|e| e.to_string())?;
            Ok(ActShape::Image { c, h: oh, w: ow })
        }
        LayerSpec::Relu => Ok(shape),
        LayerSpec::Flatten => Ok(ActShape::Flat(c * h * w)),
        LayerSpec::Linear { .. } => Err("linear layers need a flattened input".into()),
        LayerSpec::Residual { kernel } => {
            if kernel % 2 == 0 {
                return Err("residual kernel must be odd".into());
            }
            Ok(shape)
        }
    }
}

impl fmt::Display for ModelConfig {
    /// Canonical one-line description; the checkpoint digest hashes it.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (c, h, w) = self.input;
        write!(f, "input={c}x{h}x{w};classes={}", self.num_classes)?;
        for layer in &self.layers {
            write!(f, ";{layer}")?;
        }
        Ok(())
    }
}

/// Named architectures selectable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Architecture {
    BasicCnn,
    ResnetLite,
    TinyCnn,
}

impl Architecture {
    pub fn config(self, input: (usize, usize, usize), num_classes: usize) -> ModelConfig {
        match self {
            Architecture::BasicCnn => ModelConfig::basic_cnn(input, num_classes),
            Architecture::ResnetLite => ModelConfig::resnet_lite(input, num_classes),
            Architecture::TinyCnn => ModelConfig::tiny_cnn(input, num_classes),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::BasicCnn => "basic-cnn",
            Architecture::ResnetLite => "resnet-lite",
            Architecture::TinyCnn => "tiny-cnn",
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic-cnn" => Ok(Architecture::BasicCnn),
            "resnet-lite" => Ok(Architecture::ResnetLite),
            "tiny-cnn" => Ok(Architecture::TinyCnn),
            other => Err(config_err!(
                "unknown architecture {other:?} (expected basic-cnn, resnet-lite or tiny-cnn)"
            )),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_chain_on_cifar_geometry() {
        for arch in [
            Architecture::BasicCnn,
            Architecture::ResnetLite,
            Architecture::TinyCnn,
        ] {
            let shapes = arch.config((3, 32, 32), 10).shapes().unwrap();
            assert_eq!(*shapes.last().unwrap(), ActShape::Flat(10), "{arch}");
        }
    }

    #[test]
    fn empty_model_is_rejected() {
        let cfg = ModelConfig {
            input: (3, 8, 8),
            num_classes: 2,
            layers: vec![],
        };
        assert!(matches!(cfg.shapes(), Err(Error::Config(_))));
    }

    #[test]
    fn chain_errors_name_the_layer() {
        let cfg = ModelConfig {
            input: (3, 8, 8),
            num_classes: 2,
            layers: vec![LayerSpec::conv3x3(4), LayerSpec::Linear { units: 2 }],
        };
        let msg = cfg.shapes().unwrap_err().to_string();
        assert!(msg.contains("layer 1 (linear(2))"), "{msg}");
    }

    #[test]
    fn wrong_logit_count_is_rejected() {
        let cfg = ModelConfig {
            input: (1, 2, 2),
            num_classes: 3,
            layers: vec![LayerSpec::Flatten, LayerSpec::Linear { units: 2 }],
        };
        assert!(cfg.shapes().is_err());
    }

    #[test]
    fn architecture_names_round_trip() {
        for name in ["basic-cnn", "resnet-lite", "tiny-cnn"] {
            assert_eq!(name.parse::<Architecture>().unwrap().name(), name);
        }
        assert!("vgg".parse::<Architecture>().is_err());
    }
}
