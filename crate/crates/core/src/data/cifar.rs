//! CIFAR-10 binary batches.
//!
//! Each record is one label byte followed by 3072 pixel bytes: the red,
//! green and blue 32x32 planes in that order, each row-major.

use std::fs;
use std::path::Path;

use super::LabeledImage;
use crate::error::{format_err, Error, Result};
use crate::tensor::Tensor;

pub const CIFAR_CLASSES: usize = 10;
const SIDE: usize = 32;
const PIXELS: usize = 3 * SIDE * SIDE;
pub const RECORD_BYTES: usize = PIXELS + 1;

const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
const TEST_FILE: &str = "test_batch.bin";

#[derive(Clone, Debug)]
pub struct CifarSplits {
    pub train: Vec<LabeledImage>,
    pub test: Vec<LabeledImage>,
}

/// Parses one batch file's bytes. Ids are assigned consecutively from
/// `first_id`.
pub fn parse_cifar_batch(bytes: &[u8], first_id: u64) -> Result<Vec<LabeledImage>> {
    if !bytes.len().is_multiple_of(RECORD_BYTES) {
        return Err(format_err!(
            "batch of {} bytes is not a whole number of {RECORD_BYTES}-byte records",
            bytes.len()
        ));
    }
    bytes
        .chunks_exact(RECORD_BYTES)
        .enumerate()
        .map(|(i, record)| {
            let label = record[0] as usize;
            if label >= CIFAR_CLASSES {
                return Err(format_err!("record {i} has label byte {label} (> 9)"));
            }
            let pixels = record[1..].iter().map(|&b| b as f32 / 255.0).collect();
            let image = Tensor::new(vec![3, SIDE, SIDE], pixels)?;
            LabeledImage::new(first_id + i as u64, label, image)
        })
        .collect()
}

fn read_batch(path: &Path, first_id: u64) -> Result<Vec<LabeledImage>> {
    let bytes = fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    parse_cifar_batch(&bytes, first_id).map_err(|e| match e {
        Error::Format(msg) => format_err!("{}: {msg}", path.display()),
        other => other,
    })
}

/// Loads `data_batch_1..5.bin` as the training split and `test_batch.bin`
/// as the test split. Ids are the record index within each split.
pub fn load_cifar10(dir: impl AsRef<Path>) -> Result<CifarSplits> {
    let dir = dir.as_ref();
    let mut train = Vec::new();
    for name in TRAIN_FILES {
        let batch = read_batch(&dir.join(name), train.len() as u64)?;
        train.extend(batch);
    }
    let test = read_batch(&dir.join(TEST_FILE), 0)?;
    Ok(CifarSplits { train, test })
}
