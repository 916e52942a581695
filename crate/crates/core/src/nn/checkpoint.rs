//! Versioned binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "SALMAPCK"
//! version  u32      1
//! digest   32 bytes SHA-256 of the canonical model configuration string
//! count    u32      number of tensors
//! tensor*  name_len u32, name (UTF-8), rank u32, dims u32 × rank,
//!          values f32 × product(dims)
//! ```
//!
//! The two normalization vectors are stored as the tensors
//! `normalization.mean` and `normalization.std` after the model parameters.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::classifier::Classifier;
use super::config::ModelConfig;
use super::model::Model;
use super::params::{Param, ParamStore};
use crate::data::NormalizationStats;
use crate::error::{config_err, format_err, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"SALMAPCK";
pub const VERSION: u32 = 1;
const MEAN: &str = "normalization.mean";
const STD: &str = "normalization.std";

pub fn config_digest(config: &ModelConfig) -> [u8; 32] {
    Sha256::digest(config.to_string().as_bytes()).into()
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_tensor(out: &mut Vec<u8>, name: &str, t: &Tensor) {
    put_u32(out, name.len());
    out.extend_from_slice(name.as_bytes());
    put_u32(out, t.rank());
    for &d in t.shape() {
        put_u32(out, d);
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_checkpoint(classifier: &Classifier) -> Vec<u8> {
    let params = classifier.model.params().params();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&config_digest(classifier.model.config()));
    put_u32(&mut out, params.len() + 2);
    for p in params {
        put_tensor(&mut out, p.name(), p.value());
    }
    let stats = &classifier.stats;
    let ch = stats.channels();
    put_tensor(
        &mut out,
        MEAN,
        &Tensor::new(vec![ch], stats.mean().to_vec()).unwrap(),
    );
    put_tensor(
        &mut out,
        STD,
        &Tensor::new(vec![ch], stats.std().to_vec()).unwrap(),
    );
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format_err!("checkpoint truncated at byte {}", self.pos))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn tensor(&mut self) -> Result<(String, Tensor)> {
        let len = self.u32()?;
        let name = String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| format_err!("tensor name is not UTF-8"))?;
        let rank = self.u32()?;
        let shape = (0..rank).map(|_| self.u32()).collect::<Result<Vec<_>>>()?;
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| format_err!("tensor {name} is too large"))?;
        let raw = self.take(
            count
                .checked_mul(4)
                .ok_or_else(|| format_err!("tensor {name} is too large"))?,
        )?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let tensor = Tensor::new(shape, data).map_err(|e| format_err!("tensor {name}: {e}"))?;
        Ok((name, tensor))
    }
}

/// Decodes a checkpoint written for `config`. A digest mismatch means the
/// file was written for a different architecture and is a configuration
/// error; damage of any other kind is a format error.
pub fn decode_checkpoint(bytes: &[u8], config: &ModelConfig) -> Result<Classifier> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(format_err!("not a checkpoint (bad magic)"));
    }
    let version = r.u32()? as u32;
    if version != VERSION {
        return Err(format_err!("unsupported checkpoint version {version}"));
    }
    if r.take(32)? != config_digest(config) {
        return Err(config_err!(
            "checkpoint was written for a different model configuration than {config}"
        ));
    }
    let count = r.u32()?;
    let mut params = Vec::new();
    let mut mean = None;
    let mut std = None;
    for _ in 0..count {
        let (name, tensor) = r.tensor()?;
        match name.as_str() {
            MEAN => mean = Some(tensor.into_data()),
            STD => std = Some(tensor.into_data()),
            _ => params.push(Param::new(name, tensor)),
        }
    }
    if r.pos != bytes.len() {
        return Err(format_err!(
            "{} trailing bytes after checkpoint",
            bytes.len() - r.pos
        ));
    }
    let (Some(mean), Some(std)) = (mean, std) else {
        return Err(format_err!("checkpoint lacks normalization statistics"));
    };
    let model = Model::from_params(config.clone(), ParamStore::new(params))
        .map_err(|e| format_err!("checkpoint does not fit the configuration: {e}"))?;
    Classifier::new(model, NormalizationStats::new(mean, std)?)
}

pub fn save_checkpoint(classifier: &Classifier, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(classifier))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, config: &ModelConfig) -> Result<Classifier> {
    decode_checkpoint(&fs::read(path)?, config)
}
