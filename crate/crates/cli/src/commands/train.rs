use std::fmt::Write as _;
use std::fs;

use anyhow::Context;
use salmap::data::compute_stats;
use salmap::nn::{save_checkpoint, train, AdamW, EpochRecord, TrainConfig};
use salmap::{Classifier, Model};

use super::{load_dataset, model_config, prepare_out};
use crate::config::RunConfig;
use crate::error::CliResult;

pub const METRICS_HEADER: &str = "epoch,train_loss,train_acc,test_acc";

/// What `train` reports once finished.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    pub log: Vec<EpochRecord>,
    /// Test-split accuracy, or training accuracy when the test split is empty.
    pub accuracy: f32,
    pub accuracy_split: &'static str,
}

pub fn metrics_row(r: &EpochRecord) -> String {
    let test = r.test_acc.map(|a| format!("{a:.6}")).unwrap_or_default();
    format!("{},{:.6},{:.6},{test}", r.epoch, r.train_loss, r.train_acc)
}

pub fn run(config: &RunConfig) -> CliResult<TrainSummary> {
    let data = load_dataset(&config.dataset)?;
    let model_cfg = model_config(config, &data)?;
    prepare_out(config, "train")?;

    let stats = compute_stats(&data.train)?;
    let mut classifier = Classifier::new(Model::build(model_cfg, config.seed)?, stats)?;
    let train_cfg = TrainConfig {
        epochs: config.epochs,
        batch_size: config.batch_size,
        optimizer: AdamW {
            lr: config.lr,
            weight_decay: config.weight_decay,
            ..AdamW::default()
        },
        // shuffles draw from a stream distinct from the initialization
        seed: config.seed.wrapping_add(1),
    };
    let mut csv = format!("{METRICS_HEADER}\n");
    let log = train(&mut classifier, &data.train, &data.test, &train_cfg, |r| {
        let test = r
            .test_acc
            .map(|a| format!(" test_acc {a:.4}"))
            .unwrap_or_default();
        eprintln!(
            "epoch {}/{}: loss {:.4} train_acc {:.4}{test}",
            r.epoch, config.epochs, r.train_loss, r.train_acc
        );
        writeln!(csv, "{}", metrics_row(r)).unwrap();
    })?;

    let metrics = config.out.join("metrics.csv");
    fs::write(&metrics, csv).with_context(|| format!("writing {}", metrics.display()))?;
    if let Some(dir) = config
        .checkpoint
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
    {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    save_checkpoint(&classifier, &config.checkpoint)?;

    let (accuracy, accuracy_split) = if data.test.is_empty() {
        (classifier.accuracy(&data.train)?, "train")
    } else {
        (classifier.accuracy(&data.test)?, "test")
    };
    Ok(TrainSummary {
        log,
        accuracy,
        accuracy_split,
    })
}
