//! Input-gradient saliency maps.
//!
//! A [`GradientCube`] holds `∂S_c/∂I_kij` for every class `c`, channel `k`
//! and pixel `(i, j)`, where `S_c` is the class score and `ĉ` the predicted
//! class. The five map kinds reduce it to one value per pixel:
//!
//! | kind     | per channel-pixel value                          | then      |
//! |----------|--------------------------------------------------|-----------|
//! | original | `|g_ĉ|`                                          | max over k |
//! | positive | `relu(g_ĉ)`                                      | max over k |
//! | negative | `relu(-g_ĉ)`                                     | max over k |
//! | active   | `g_ĉ` if `g_ĉ = max_c g_c`, else 0               | max over k |
//! | inactive | `g_ĉ` if `g_ĉ = min_c g_c`, else 0               | max over k |
//!
//! Active and inactive values keep their sign, so those maps may hold
//! negative values. [`SignMode::Strict`] instead keeps only the sign each
//! kind is named for: active keeps `relu(g_ĉ)` and inactive keeps the
//! magnitude `relu(-g_ĉ)`, both non-negative.

mod archive;

pub use archive::{
    decode_map_archive, encode_map_archive, read_map_archive, write_map_archive, ARCHIVE_MAGIC,
};

use std::fmt;
use std::str::FromStr;

use crate::data::LabeledImage;
use crate::error::{config_err, shape_err, Error, Result};
use crate::nn::{softmax, Classifier, Model};
use crate::tensor::Tensor;

/// Which scalar the gradients are taken of.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScoreKind {
    /// Pre-softmax logit.
    #[default]
    Logit,
    /// Softmax probability.
    Softmax,
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logit" | "logits" => Ok(ScoreKind::Logit),
            "softmax" => Ok(ScoreKind::Softmax),
            other => Err(config_err!(
                "unknown score {other:?} (expected logit or softmax)"
            )),
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreKind::Logit => "logit",
            ScoreKind::Softmax => "softmax",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SignMode {
    #[default]
    Literal,
    Strict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MapKind {
    Original,
    Positive,
    Negative,
    Active,
    Inactive,
}

impl MapKind {
    pub const ALL: [MapKind; 5] = [
        MapKind::Original,
        MapKind::Positive,
        MapKind::Negative,
        MapKind::Active,
        MapKind::Inactive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MapKind::Original => "original",
            MapKind::Positive => "positive",
            MapKind::Negative => "negative",
            MapKind::Active => "active",
            MapKind::Inactive => "inactive",
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

impl FromStr for MapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| config_err!("unknown map kind {s:?}"))
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-class input gradients of one image, `classes × channels × H × W`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientCube {
    values: Tensor,
    predicted_class: usize,
    image_id: u64,
}

impl GradientCube {
    pub fn new(values: Tensor, predicted_class: usize, image_id: u64) -> Result<Self> {
        let (classes, _, _, _) = values.dims4()?;
        if predicted_class >= classes {
            return Err(shape_err!(
                "predicted class {predicted_class} out of range for {classes} classes"
            ));
        }
        if !values.all_finite() {
            return Err(Error::Argument(format!(
                "gradient cube for image {image_id} has non-finite entries"
            )));
        }
        Ok(Self {
            values,
            predicted_class,
            image_id,
        })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn predicted_class(&self) -> usize {
        self.predicted_class
    }

    pub fn image_id(&self) -> u64 {
        self.image_id
    }

    /// `(classes, channels, height, width)`
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        self.values.dims4().expect("validated at construction")
    }

    /// Gradient image of class `c` as a flat `channels × H × W` slice.
    pub fn class_slice(&self, c: usize) -> &[f32] {
        let (_, k, h, w) = self.dims();
        &self.values.data()[c * k * h * w..(c + 1) * k * h * w]
    }
}

/// Gradient cube of a model-input image (`C×H×W` or `1×C×H×W`, already
/// normalized): one forward pass, then one backward pass per class.
pub fn compute_gradient_cube(
    model: &Model,
    image: &Tensor,
    image_id: u64,
    score: ScoreKind,
) -> Result<GradientCube> {
    let batch = match image.rank() {
        3 => {
            let mut shape = vec![1];
            shape.extend_from_slice(image.shape());
            image.clone().reshape(shape)?
        }
        4 if image.shape()[0] == 1 => image.clone(),
        _ => {
            return Err(shape_err!(
                "expected one CxHxW image, got {:?}",
                image.shape()
            ))
        }
    };
    let (predictions, trace) = model.forward(&batch)?;
    let prediction = &predictions[0];
    let classes = prediction.logits.len();
    let probs = softmax(&prediction.logits);
    let mut slices = Vec::with_capacity(classes);
    for c in 0..classes {
        let cotangent: Vec<f32> = match score {
            ScoreKind::Logit => (0..classes)
                .map(|j| if j == c { 1.0 } else { 0.0 })
                .collect(),
            // ∂p_c/∂z_j = p_c (δ_cj − p_j)
            ScoreKind::Softmax => (0..classes)
                .map(|j| probs[c] * (if j == c { 1.0 } else { 0.0 } - probs[j]))
                .collect(),
        };
        let cot = Tensor::new(vec![1, classes], cotangent)?;
        let grad = model.backward_input(&trace, &cot)?;
        slices.push(grad.reshape(batch.shape()[1..].to_vec())?);
    }
    GradientCube::new(
        Tensor::stack(&slices)?,
        prediction.predicted_class,
        image_id,
    )
}

/// Gradient cube of a raw dataset image, taken with respect to the
/// normalized tensor the network consumes.
pub fn image_gradient_cube(
    classifier: &Classifier,
    image: &LabeledImage,
    score: ScoreKind,
) -> Result<GradientCube> {
    let input = classifier.stats.normalize(image.image())?;
    compute_gradient_cube(&classifier.model, &input, image.id, score)
}

/// A 2-D importance map with its kind tag.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    kind: MapKind,
    image_id: u64,
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl SaliencyMap {
    pub fn new(
        kind: MapKind,
        image_id: u64,
        height: usize,
        width: usize,
        values: Vec<f32>,
    ) -> Result<Self> {
        if values.len() != height * width || values.is_empty() {
            return Err(shape_err!(
                "{} values for a {height}x{width} map",
                values.len()
            ));
        }
        Ok(Self {
            kind,
            image_id,
            height,
            width,
            values,
        })
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn image_id(&self) -> u64 {
        self.image_id
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.width + col]
    }

    /// Number of pixels with a non-zero value.
    pub fn support(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0.0).count()
    }

    /// 8-bit grayscale rendering: an affine rescale of the values to
    /// `[0, 255]` (floor rounding). Active and inactive maps are rescaled by
    /// absolute value. A constant map renders black.
    pub fn to_display(&self) -> Vec<u8> {
        let signed = matches!(self.kind, MapKind::Active | MapKind::Inactive);
        let values: Vec<f64> = self
            .values
            .iter()
            .map(|&v| if signed { v.abs() as f64 } else { v as f64 })
            .collect();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            return vec![0; values.len()];
        }
        values
            .iter()
            .map(|v| ((v - lo) / (hi - lo) * 255.0).floor().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// Reduces per channel-pixel values to a map by taking the maximum over
/// channels.
fn channel_max(cube: &GradientCube, kind: MapKind, value: impl Fn(usize) -> f32) -> SaliencyMap {
    let (_, channels, h, w) = cube.dims();
    let plane = h * w;
    let values = (0..plane)
        .map(|p| {
            (0..channels)
                .map(|k| value(k * plane + p))
                .fold(f32::NEG_INFINITY, f32::max)
        })
        .collect();
    SaliencyMap::new(kind, cube.image_id, h, w, values).expect("cube dims are valid")
}

fn relu(v: f32) -> f32 {
    v.max(0.0)
}

pub fn original_map(cube: &GradientCube) -> SaliencyMap {
    let g = cube.class_slice(cube.predicted_class);
    channel_max(cube, MapKind::Original, |i| g[i].abs())
}

pub fn positive_map(cube: &GradientCube) -> SaliencyMap {
    let g = cube.class_slice(cube.predicted_class);
    channel_max(cube, MapKind::Positive, |i| relu(g[i]))
}

pub fn negative_map(cube: &GradientCube) -> SaliencyMap {
    let g = cube.class_slice(cube.predicted_class);
    channel_max(cube, MapKind::Negative, |i| relu(-g[i]))
}

/// Whether the predicted class attains the extreme over classes at flat
/// channel-pixel offset `i`; ties count as attained.
fn attains(cube: &GradientCube, i: usize, want_max: bool) -> bool {
    let (classes, _, _, _) = cube.dims();
    let own = cube.class_slice(cube.predicted_class)[i];
    (0..classes).all(|c| {
        let other = cube.class_slice(c)[i];
        if want_max {
            own >= other
        } else {
            own <= other
        }
    })
}

pub fn active_map(cube: &GradientCube, mode: SignMode) -> SaliencyMap {
    let g = cube.class_slice(cube.predicted_class);
    channel_max(cube, MapKind::Active, |i| {
        if !attains(cube, i, true) {
            0.0
        } else if mode == SignMode::Strict {
            relu(g[i])
        } else {
            g[i]
        }
    })
}

pub fn inactive_map(cube: &GradientCube, mode: SignMode) -> SaliencyMap {
    let g = cube.class_slice(cube.predicted_class);
    channel_max(cube, MapKind::Inactive, |i| {
        if !attains(cube, i, false) {
            0.0
        } else if mode == SignMode::Strict {
            relu(-g[i])
        } else {
            g[i]
        }
    })
}

pub fn build_map(cube: &GradientCube, kind: MapKind, mode: SignMode) -> SaliencyMap {
    match kind {
        MapKind::Original => original_map(cube),
        MapKind::Positive => positive_map(cube),
        MapKind::Negative => negative_map(cube),
        MapKind::Active => active_map(cube, mode),
        MapKind::Inactive => inactive_map(cube, mode),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `classes` gradient images of one channel each, 2×2.
    fn cube(pred: usize, classes: &[[f32; 4]]) -> GradientCube {
        let data = classes.iter().flatten().copied().collect();
        GradientCube::new(
            Tensor::new(vec![classes.len(), 1, 2, 2], data).unwrap(),
            pred,
            0,
        )
        .unwrap()
    }

    const G0: [f32; 4] = [0.5, -0.3, 0.2, 0.0];
    const G1: [f32; 4] = [0.1, -0.5, 0.4, 0.0];

    #[test]
    fn signed_maps_hand_cases() {
        let c = cube(0, &[G0]);
        assert_eq!(original_map(&c).values(), &[0.5, 0.3, 0.2, 0.0]);
        assert_eq!(positive_map(&c).values(), &[0.5, 0.0, 0.2, 0.0]);
        assert_eq!(negative_map(&c).values(), &[0.0, 0.3, 0.0, 0.0]);
    }

    #[test]
    fn channel_max_of_absolutes() {
        let t = Tensor::new(vec![1, 2, 1, 1], vec![0.2, -0.7]).unwrap();
        let c = GradientCube::new(t, 0, 0).unwrap();
        assert_eq!(original_map(&c).values(), &[0.7]);
    }

    #[test]
    fn active_and_inactive_hand_cases() {
        let c = cube(0, &[G0, G1]);
        assert_eq!(
            active_map(&c, SignMode::Literal).values(),
            &[0.5, -0.3, 0.0, 0.0]
        );
        assert_eq!(
            inactive_map(&c, SignMode::Literal).values(),
            &[0.0, 0.0, 0.2, 0.0]
        );
    }

    #[test]
    fn strict_mode_keeps_named_sign() {
        let c = cube(0, &[G0, G1]);
        assert_eq!(
            active_map(&c, SignMode::Strict).values(),
            &[0.5, 0.0, 0.0, 0.0]
        );
        let c = cube(1, &[G0, G1]);
        // class 1 attains the min at pixel 1 (−0.5) and the max at pixel 2
        assert_eq!(
            inactive_map(&c, SignMode::Strict).values(),
            &[0.0, 0.5, 0.0, 0.0]
        );
    }

    #[test]
    fn single_class_active_equals_inactive_equals_raw() {
        let c = cube(0, &[G0]);
        assert_eq!(active_map(&c, SignMode::Literal).values(), &G0);
        assert_eq!(inactive_map(&c, SignMode::Literal).values(), &G0);
    }

    #[test]
    fn dominated_class_has_empty_maps() {
        let low = [-1.0, -1.0, -1.0, -1.0];
        let high = [1.0, 1.0, 1.0, 1.0];
        assert_eq!(
            active_map(&cube(0, &[low, high]), SignMode::Literal).support(),
            0
        );
        assert_eq!(
            inactive_map(&cube(0, &[high, low]), SignMode::Literal).support(),
            0
        );
    }

    #[test]
    fn zero_and_sign_extreme_cubes() {
        let zero = cube(0, &[[0.0; 4]]);
        assert_eq!(original_map(&zero).values(), &[0.0; 4]);
        let neg = cube(0, &[[-0.1, -0.2, -0.3, -0.4]]);
        assert_eq!(positive_map(&neg).values(), &[0.0; 4]);
        let pos = cube(0, &[[0.1, 0.2, 0.3, 0.4]]);
        assert_eq!(negative_map(&pos).values(), &[0.0; 4]);
        assert_eq!(positive_map(&pos).values(), original_map(&pos).values());
    }

    #[test]
    fn display_rescaling() {
        let m = SaliencyMap::new(MapKind::Original, 0, 1, 2, vec![0.0, 1.0]).unwrap();
        assert_eq!(m.to_display(), vec![0, 255]);
        let m = SaliencyMap::new(MapKind::Original, 0, 1, 3, vec![0.5, 0.25, 0.0]).unwrap();
        assert_eq!(m.to_display(), vec![255, 127, 0]);
        let m = SaliencyMap::new(MapKind::Positive, 0, 2, 2, vec![0.3; 4]).unwrap();
        assert_eq!(m.to_display(), vec![0; 4]);
        let m = SaliencyMap::new(MapKind::Active, 0, 1, 3, vec![-1.0, 0.5, 0.0]).unwrap();
        assert_eq!(m.to_display(), vec![255, 127, 0]);
    }

    #[test]
    fn kind_names_and_codes() {
        for kind in MapKind::ALL {
            assert_eq!(kind.name().parse::<MapKind>().unwrap(), kind);
            assert_eq!(MapKind::from_code(kind.code()), Some(kind));
        }
        assert!("gradcam".parse::<MapKind>().is_err());
        assert_eq!(MapKind::from_code(9), None);
    }
}
