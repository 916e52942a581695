use std::fmt::Write as _;
use std::fs;

use anyhow::{anyhow, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use salmap::data::{export_image, export_map, ImageFormat};
use salmap::saliency::{build_map, image_gradient_cube, write_map_archive};
use salmap::{Classifier, LabeledImage, SaliencyMap, Tensor};

use super::{load_dataset, open_classifier, prepare_out};
use crate::config::RunConfig;
use crate::error::{usage, CliResult};

pub const ARCHIVE_NAME: &str = "maps.bin";
pub const GALLERY_INDEX: &str = "gallery.csv";

/// One exported gallery row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GalleryEntry {
    pub id: u64,
    pub label: usize,
    pub predicted: usize,
}

/// One correctly classified image per class, drawn uniformly with a seeded
/// generator. Classes are visited in order, so the draw is reproducible.
pub fn select_per_class(
    classifier: &Classifier,
    images: &[LabeledImage],
    seed: u64,
) -> CliResult<Vec<usize>> {
    let refs: Vec<&Tensor> = images.iter().map(|x| x.image()).collect();
    let predicted = classifier.predict_classes(&refs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..classifier.num_classes())
        .map(|class| {
            let candidates: Vec<usize> = (0..images.len())
                .filter(|&i| images[i].label == class && predicted[i] == class)
                .collect();
            if candidates.is_empty() {
                return Err(anyhow!("no correctly classified example of class {class}").into());
            }
            Ok(candidates[rng.gen_range(0..candidates.len())])
        })
        .collect()
}

pub fn run(config: &RunConfig) -> CliResult<Vec<GalleryEntry>> {
    let data = load_dataset(&config.dataset)?;
    let classifier = open_classifier(config, &data)?;
    let images = data.split(config.split);
    let selected = if config.per_class {
        select_per_class(&classifier, images, config.seed)?
    } else if !config.ids.is_empty() {
        config
            .ids
            .iter()
            .map(|&id| {
                images.iter().position(|x| x.id == id).ok_or_else(|| {
                    usage!(
                        "image id {id} is not in the {} split ({} images)",
                        config.split.name(),
                        images.len()
                    )
                })
            })
            .collect::<CliResult<Vec<_>>>()?
    } else {
        return Err(usage!("saliency needs image ids or per_class"));
    };
    prepare_out(config, "saliency")?;

    let mut maps: Vec<SaliencyMap> = Vec::new();
    let mut entries = Vec::new();
    for &index in &selected {
        let image = &images[index];
        let cube = image_gradient_cube(&classifier, image, config.score)?;
        let path = config.out.join(format!("{}_image.ppm", image.id));
        export_image(image.image(), &path, ImageFormat::Ppm)?;
        for &kind in &config.kinds {
            let map = build_map(&cube, kind, config.sign_mode);
            export_map(&map, &config.out.join(format!("{}_{kind}.pgm", image.id)))?;
            maps.push(map);
        }
        entries.push(GalleryEntry {
            id: image.id,
            label: image.label,
            predicted: cube.predicted_class(),
        });
    }
    write_map_archive(&config.out.join(ARCHIVE_NAME), &maps)?;
    let mut index = String::from("id,label,predicted\n");
    for e in &entries {
        writeln!(index, "{},{},{}", e.id, e.label, e.predicted).unwrap();
    }
    let path = config.out.join(GALLERY_INDEX);
    fs::write(&path, index).with_context(|| format!("writing {}", path.display()))?;
    Ok(entries)
}
