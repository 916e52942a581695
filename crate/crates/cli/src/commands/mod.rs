//! One module per subcommand plus the plumbing they share.

pub mod benchmark;
pub mod report;
pub mod saliency;
pub mod train;

use std::fs;
use std::io::ErrorKind;

use anyhow::Context;
use salmap::data::{load_cifar10, synthetic_dataset, CIFAR_CLASSES};
use salmap::nn::load_checkpoint;
use salmap::{Classifier, LabeledImage, ModelConfig};

use crate::config::{DatasetSource, RunConfig, Split};
use crate::error::{usage, CliResult};

/// Synthetic splits use fixed seeds so every run sees the same images.
const SYNTHETIC_TRAIN_SEED: u64 = 0x5EED_0001;
const SYNTHETIC_TEST_SEED: u64 = 0x5EED_0002;

pub struct Dataset {
    pub train: Vec<LabeledImage>,
    pub test: Vec<LabeledImage>,
    pub input: (usize, usize, usize),
    pub classes: usize,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[LabeledImage] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }
}

pub fn load_dataset(source: &DatasetSource) -> CliResult<Dataset> {
    match source {
        DatasetSource::Cifar10 { dir } => {
            if !dir.is_dir() {
                return Err(usage!("CIFAR-10 directory {} not found", dir.display()));
            }
            let splits = load_cifar10(dir).map_err(|e| match e {
                salmap::Error::Io(io) if io.kind() == ErrorKind::NotFound => {
                    usage!("CIFAR-10 batch missing in {}: {io}", dir.display())
                }
                other => other.into(),
            })?;
            Ok(Dataset {
                train: splits.train,
                test: splits.test,
                input: (3, 32, 32),
                classes: CIFAR_CLASSES,
            })
        }
        &DatasetSource::Synthetic {
            train,
            test,
            classes,
            size,
        } => Ok(Dataset {
            train: synthetic_dataset(train, classes, size, SYNTHETIC_TRAIN_SEED)?,
            test: synthetic_dataset(test, classes, size, SYNTHETIC_TEST_SEED)?,
            input: (3, size, size),
            classes,
        }),
    }
}

pub fn model_config(config: &RunConfig, data: &Dataset) -> CliResult<ModelConfig> {
    let model = config.arch.config(data.input, data.classes);
    model.shapes().map_err(|e| {
        usage!(
            "{} does not fit {:?} inputs: {e}",
            config.arch.name(),
            data.input
        )
    })?;
    Ok(model)
}

pub fn open_classifier(config: &RunConfig, data: &Dataset) -> CliResult<Classifier> {
    let model = model_config(config, data)?;
    if !config.checkpoint.is_file() {
        return Err(usage!(
            "checkpoint {} not found",
            config.checkpoint.display()
        ));
    }
    Ok(load_checkpoint(&config.checkpoint, &model)?)
}

/// Creates the output directory and echoes the effective configuration
/// into it as `<command>_config.ini`.
pub fn prepare_out(config: &RunConfig, command: &str) -> CliResult<()> {
    fs::create_dir_all(&config.out)
        .with_context(|| format!("creating {}", config.out.display()))?;
    let path = config.out.join(format!("{command}_config.ini"));
    fs::write(&path, config.to_ini()).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
