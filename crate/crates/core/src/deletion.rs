//! Black- and white-deletion benchmarks.
//!
//! Pixels are ranked once per image from its saliency map, then
//! progressively replaced by black (0.0) or white (1.0) on every channel of
//! the raw image. *Allegiance* at a fraction is the share of images whose
//! prediction is unchanged from the unmodified image. Fractions are of the
//! total pixel count; a plan that runs out of eligible pixels stops, so
//! curves for sparse maps go flat once their support is exhausted.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::data::LabeledImage;
use crate::error::{config_err, format_err, shape_err, Error, Result};
use crate::nn::Classifier;
use crate::saliency::{build_map, image_gradient_cube, MapKind, SaliencyMap, ScoreKind, SignMode};
use crate::tensor::Tensor;

/// Sample points: 10% blocks with a finer start.
pub const DEFAULT_FRACTIONS: [f64; 14] = [
    0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0,
];

/// Default pairings: brightening-evidence maps are deleted to black,
/// darkening-evidence maps to white.
pub const DEFAULT_PAIRS: [(MapKind, Color); 6] = [
    (MapKind::Original, Color::Black),
    (MapKind::Positive, Color::Black),
    (MapKind::Active, Color::Black),
    (MapKind::Original, Color::White),
    (MapKind::Negative, Color::White),
    (MapKind::Inactive, Color::White),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Color {
    Black,
    White,
}

impl Color {
    pub fn value(self) -> f32 {
        match self {
            Color::Black => 0.0,
            Color::White => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::Black => "black",
            Color::White => "white",
        }
    }
}

impl FromStr for Color {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "black" => Ok(Color::Black),
            "white" => Ok(Color::White),
            other => Err(config_err!(
                "unknown color {other:?} (expected black or white)"
            )),
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How inactive maps are ordered for deletion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InactiveOrder {
    /// Most negative value first.
    #[default]
    Ascending,
    /// Largest absolute value first.
    Magnitude,
}

impl FromStr for InactiveOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ascending" => Ok(InactiveOrder::Ascending),
            "magnitude" => Ok(InactiveOrder::Magnitude),
            other => Err(config_err!(
                "unknown inactive order {other:?} (expected ascending or magnitude)"
            )),
        }
    }
}

impl fmt::Display for InactiveOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InactiveOrder::Ascending => "ascending",
            InactiveOrder::Magnitude => "magnitude",
        })
    }
}

/// Pixels of one image in deletion order, most important first.
#[derive(Clone, Debug, PartialEq)]
pub struct DeletionPlan {
    pub image_id: u64,
    pub kind: MapKind,
    pub height: usize,
    pub width: usize,
    /// `(row, col)`, unique.
    pub pixels: Vec<(usize, usize)>,
}

impl DeletionPlan {
    pub fn eligible_count(&self) -> usize {
        self.pixels.len()
    }

    /// Eligible pixels as a share of the whole image.
    pub fn eligible_fraction(&self) -> f64 {
        self.pixels.len() as f64 / (self.height * self.width) as f64
    }

    /// Pixels removed at `fraction`: `round_half_up(fraction · H · W)`,
    /// capped at the eligible count.
    pub fn deletion_count(&self, fraction: f64) -> usize {
        let total = (self.height * self.width) as f64;
        ((fraction * total + 0.5).floor() as usize).min(self.pixels.len())
    }
}

/// Orders pixels for deletion. Original maps rank every pixel; the other
/// kinds only rank non-zero pixels. Inactive maps go ascending (or by
/// magnitude); every other kind descending. Ties break row-major.
pub fn rank_pixels(map: &SaliencyMap, inactive_order: InactiveOrder) -> DeletionPlan {
    let values = map.values();
    let mut order: Vec<usize> = (0..values.len())
        .filter(|&i| map.kind() == MapKind::Original || values[i] != 0.0)
        .collect();
    // stable sorts keep row-major order among ties
    match (map.kind(), inactive_order) {
        (MapKind::Inactive, InactiveOrder::Ascending) => {
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]))
        }
        (MapKind::Inactive, InactiveOrder::Magnitude) => {
            order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()))
        }
        _ => order.sort_by(|&a, &b| values[b].total_cmp(&values[a])),
    }
    DeletionPlan {
        image_id: map.image_id(),
        kind: map.kind(),
        height: map.height(),
        width: map.width(),
        pixels: order
            .into_iter()
            .map(|i| (i / map.width(), i % map.width()))
            .collect(),
    }
}

/// Raw image with the first `deletion_count(fraction)` planned pixels set
/// to `color` on every channel.
pub fn apply_deletion(
    image: &Tensor,
    plan: &DeletionPlan,
    fraction: f64,
    color: Color,
) -> Result<Tensor> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Argument(format!(
            "fraction {fraction} outside [0, 1]"
        )));
    }
    let [c, h, w] = *image.shape() else {
        return Err(shape_err!(
            "expected a CxHxW image, got {:?}",
            image.shape()
        ));
    };
    if (h, w) != (plan.height, plan.width) {
        return Err(shape_err!(
            "plan is {}x{} but image is {h}x{w}",
            plan.height,
            plan.width
        ));
    }
    let mut out = image.clone();
    let data = out.data_mut();
    for &(r, col) in &plan.pixels[..plan.deletion_count(fraction)] {
        for ch in 0..c {
            data[(ch * h + r) * w + col] = color.value();
        }
    }
    Ok(out)
}

/// Allegiance samples for one `(map kind, color)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct DeletionCurve {
    pub kind: MapKind,
    pub color: Color,
    pub fractions: Vec<f64>,
    pub allegiance: Vec<f64>,
    pub auc: f64,
}

impl DeletionCurve {
    pub fn new(
        kind: MapKind,
        color: Color,
        fractions: Vec<f64>,
        allegiance: Vec<f64>,
    ) -> Result<Self> {
        validate_fractions(&fractions)?;
        if allegiance.len() != fractions.len() {
            return Err(shape_err!(
                "{} allegiance values for {} fractions",
                allegiance.len(),
                fractions.len()
            ));
        }
        let auc = auc(&fractions, &allegiance)?;
        Ok(Self {
            kind,
            color,
            fractions,
            allegiance,
            auc,
        })
    }
}

/// Sample points must start at 0, increase strictly and stay within 1.
pub fn validate_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.first() != Some(&0.0) {
        return Err(config_err!("fractions must start at 0, got {fractions:?}"));
    }
    // NaN fails the comparison too
    if fractions
        .windows(2)
        .any(|w| w[1].partial_cmp(&w[0]) != Some(Ordering::Greater))
    {
        return Err(config_err!(
            "fractions must be strictly increasing: {fractions:?}"
        ));
    }
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(config_err!("fractions must lie in [0, 1]: {fractions:?}"));
    }
    Ok(())
}

/// Trapezoidal area under allegiance over `[0, 1]`; the last sample is held
/// flat up to 1.
pub fn auc(fractions: &[f64], allegiance: &[f64]) -> Result<f64> {
    if fractions.len() != allegiance.len() || fractions.is_empty() {
        return Err(shape_err!(
            "{} fractions and {} allegiance values",
            fractions.len(),
            allegiance.len()
        ));
    }
    let mut area = 0.0;
    for i in 1..fractions.len() {
        area += (fractions[i] - fractions[i - 1]) * (allegiance[i] + allegiance[i - 1]) / 2.0;
    }
    let last = fractions.len() - 1;
    area += (1.0 - fractions[last]) * allegiance[last];
    Ok(area)
}

/// Share of positions where `after` equals `before`.
pub fn allegiance(before: &[usize], after: &[usize]) -> f64 {
    let kept = before.iter().zip(after).filter(|(a, b)| a == b).count();
    kept as f64 / before.len() as f64
}

/// Runs one deletion curve. `maps[i]` must belong to `images[i]`, and
/// `original` holds each image's prediction on the unmodified image.
pub fn run_curve_with(
    classifier: &Classifier,
    images: &[LabeledImage],
    original: &[usize],
    plans: &[DeletionPlan],
    color: Color,
    fractions: &[f64],
) -> Result<DeletionCurve> {
    if images.is_empty() {
        return Err(config_err!("deletion benchmark needs at least one image"));
    }
    if plans.len() != images.len() || original.len() != images.len() {
        return Err(shape_err!(
            "{} images, {} plans, {} predictions",
            images.len(),
            plans.len(),
            original.len()
        ));
    }
    validate_fractions(fractions)?;
    let kind = plans[0].kind;
    let mut values = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let occluded = images
            .iter()
            .zip(plans)
            .map(|(img, plan)| {
                if plan.image_id != img.id {
                    return Err(shape_err!(
                        "plan for image {} paired with image {}",
                        plan.image_id,
                        img.id
                    ));
                }
                apply_deletion(img.image(), plan, fraction, color)
            })
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Tensor> = occluded.iter().collect();
        let after = classifier.predict_classes(&refs)?;
        values.push(allegiance(original, &after));
    }
    DeletionCurve::new(kind, color, fractions.to_vec(), values)
}

/// Settings shared by every curve of a benchmark run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BenchOptions {
    pub score: ScoreKind,
    pub sign_mode: SignMode,
    pub inactive_order: InactiveOrder,
}

/// Computes the maps of `kind` for every image.
pub fn compute_maps(
    classifier: &Classifier,
    images: &[LabeledImage],
    kind: MapKind,
    opts: &BenchOptions,
) -> Result<Vec<SaliencyMap>> {
    images
        .iter()
        .map(|img| {
            Ok(build_map(
                &image_gradient_cube(classifier, img, opts.score)?,
                kind,
                opts.sign_mode,
            ))
        })
        .collect()
}

/// Runs a single curve, computing maps on the fly.
pub fn run_curve(
    classifier: &Classifier,
    images: &[LabeledImage],
    kind: MapKind,
    color: Color,
    fractions: &[f64],
    opts: &BenchOptions,
) -> Result<DeletionCurve> {
    let maps = compute_maps(classifier, images, kind, opts)?;
    run_curve_on_maps(
        classifier,
        images,
        &maps,
        color,
        fractions,
        opts.inactive_order,
    )
}

/// Runs a single curve from precomputed (for example archived) maps.
pub fn run_curve_on_maps(
    classifier: &Classifier,
    images: &[LabeledImage],
    maps: &[SaliencyMap],
    color: Color,
    fractions: &[f64],
    inactive_order: InactiveOrder,
) -> Result<DeletionCurve> {
    if images.is_empty() {
        return Err(config_err!("deletion benchmark needs at least one image"));
    }
    let refs: Vec<&Tensor> = images.iter().map(|x| x.image()).collect();
    let original = classifier.predict_classes(&refs)?;
    let plans: Vec<DeletionPlan> = maps
        .iter()
        .map(|m| rank_pixels(m, inactive_order))
        .collect();
    run_curve_with(classifier, images, &original, &plans, color, fractions)
}

/// Result of a benchmark run: curves in request order plus, for each map
/// kind used, every image's eligible-set fraction in image order.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkResult {
    pub curves: Vec<DeletionCurve>,
    pub eligible_fractions: Vec<(MapKind, Vec<f64>)>,
}

impl BenchmarkResult {
    fn fractions_of(&self, kind: MapKind) -> Option<&[f64]> {
        self.eligible_fractions
            .iter()
            .find(|e| e.0 == kind)
            .map(|e| e.1.as_slice())
    }

    pub fn mean_eligible_fraction(&self, kind: MapKind) -> Option<f64> {
        self.fractions_of(kind)
            .map(|f| f.iter().sum::<f64>() / f.len() as f64)
    }

    pub fn max_eligible_fraction(&self, kind: MapKind) -> Option<f64> {
        self.fractions_of(kind)
            .map(|f| f.iter().copied().fold(0.0, f64::max))
    }
}

/// Runs several `(kind, color)` curves, computing each image's gradient
/// cube once.
pub fn run_benchmark(
    classifier: &Classifier,
    images: &[LabeledImage],
    pairs: &[(MapKind, Color)],
    fractions: &[f64],
    opts: &BenchOptions,
) -> Result<BenchmarkResult> {
    if images.is_empty() {
        return Err(config_err!("deletion benchmark needs at least one image"));
    }
    validate_fractions(fractions)?;
    let kinds = distinct_kinds(pairs);
    let mut maps = Vec::with_capacity(images.len() * kinds.len());
    for img in images {
        let cube = image_gradient_cube(classifier, img, opts.score)?;
        maps.extend(
            kinds
                .iter()
                .map(|&kind| build_map(&cube, kind, opts.sign_mode)),
        );
    }
    run_benchmark_on_maps(
        classifier,
        images,
        &maps,
        pairs,
        fractions,
        opts.inactive_order,
    )
}

/// Runs several curves from precomputed maps. `maps` may hold any kinds in
/// any order but needs one map per image for every kind in `pairs`.
pub fn run_benchmark_on_maps(
    classifier: &Classifier,
    images: &[LabeledImage],
    maps: &[SaliencyMap],
    pairs: &[(MapKind, Color)],
    fractions: &[f64],
    inactive_order: InactiveOrder,
) -> Result<BenchmarkResult> {
    if images.is_empty() {
        return Err(config_err!("deletion benchmark needs at least one image"));
    }
    validate_fractions(fractions)?;
    let kinds = distinct_kinds(pairs);
    let index: HashMap<(MapKind, u64), &SaliencyMap> =
        maps.iter().map(|m| ((m.kind(), m.image_id()), m)).collect();
    let plans = kinds
        .iter()
        .map(|&kind| {
            images
                .iter()
                .map(|img| {
                    let map = index
                        .get(&(kind, img.id))
                        .ok_or_else(|| config_err!("no {kind} map for image {}", img.id))?;
                    Ok(rank_pixels(map, inactive_order))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Tensor> = images.iter().map(|x| x.image()).collect();
    let original = classifier.predict_classes(&refs)?;
    let curves = pairs
        .iter()
        .map(|&(kind, color)| {
            let slot = kinds.binary_search(&kind).expect("kind collected above");
            run_curve_with(
                classifier,
                images,
                &original,
                &plans[slot],
                color,
                fractions,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let eligible_fractions = kinds
        .iter()
        .zip(&plans)
        .map(|(&k, p)| (k, p.iter().map(DeletionPlan::eligible_fraction).collect()))
        .collect();
    Ok(BenchmarkResult {
        curves,
        eligible_fractions,
    })
}

fn distinct_kinds(pairs: &[(MapKind, Color)]) -> Vec<MapKind> {
    let mut kinds: Vec<MapKind> = pairs.iter().map(|p| p.0).collect();
    kinds.sort();
    kinds.dedup();
    kinds
}

pub const CURVE_HEADER: &str = "kind,color,fraction,allegiance";
pub const AUC_HEADER: &str = "kind,color,auc";

pub fn curve_csv(curve: &DeletionCurve) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for (f, a) in curve.fractions.iter().zip(&curve.allegiance) {
        writeln!(out, "{},{},{f:.6},{a:.6}", curve.kind, curve.color).unwrap();
    }
    out
}

pub fn auc_summary_csv(curves: &[DeletionCurve]) -> String {
    let mut out = format!("{AUC_HEADER}\n");
    for c in curves {
        writeln!(out, "{},{},{:.6}", c.kind, c.color, c.auc).unwrap();
    }
    out
}

pub fn write_curve_csv(path: &Path, curve: &DeletionCurve) -> Result<()> {
    fs::write(path, curve_csv(curve))?;
    Ok(())
}

pub fn write_auc_summary(path: &Path, curves: &[DeletionCurve]) -> Result<()> {
    fs::write(path, auc_summary_csv(curves))?;
    Ok(())
}

fn data_rows<'a>(text: &'a str, header: &str) -> Result<impl Iterator<Item = Vec<&'a str>>> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(format_err!("expected CSV header {header:?}"));
    }
    Ok(lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').collect()))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| format_err!("bad number {s:?}"))
}

/// Parses an AUC summary back into `(kind, color, auc)` rows.
pub fn parse_auc_summary(text: &str) -> Result<Vec<(MapKind, Color, f64)>> {
    data_rows(text, AUC_HEADER)?
        .map(|row| match row.as_slice() {
            [k, c, a] => Ok((k.parse()?, c.parse()?, parse_f64(a)?)),
            _ => Err(format_err!("malformed AUC row {row:?}")),
        })
        .collect()
}

/// Parses a curve CSV; AUC is recomputed from the samples.
pub fn parse_curve_csv(text: &str) -> Result<DeletionCurve> {
    let mut kind_color = None;
    let mut fractions = Vec::new();
    let mut values = Vec::new();
    for row in data_rows(text, CURVE_HEADER)? {
        let [k, c, f, a] = row.as_slice() else {
            return Err(format_err!("malformed curve row {row:?}"));
        };
        let kc: (MapKind, Color) = (k.parse()?, c.parse()?);
        if *kind_color.get_or_insert(kc) != kc {
            return Err(format_err!("curve mixes several kind/color pairs"));
        }
        fractions.push(parse_f64(f)?);
        values.push(parse_f64(a)?);
    }
    let (kind, color) = kind_color.ok_or_else(|| format_err!("curve has no samples"))?;
    DeletionCurve::new(kind, color, fractions, values)
}
