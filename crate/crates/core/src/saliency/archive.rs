//! Map archive: `SALMAPAR` magic, a little-endian `u32` record count, then
//! per map `image_id u64, kind u8, height u32, width u32` followed by
//! `height·width` little-endian `f32` values.

use std::fs;
use std::path::Path;

use super::{MapKind, SaliencyMap};
use crate::error::{format_err, Result};

pub const ARCHIVE_MAGIC: &[u8; 8] = b"SALMAPAR";

pub fn encode_map_archive(maps: &[SaliencyMap]) -> Vec<u8> {
    let mut out = ARCHIVE_MAGIC.to_vec();
    out.extend_from_slice(&(maps.len() as u32).to_le_bytes());
    for m in maps {
        out.extend_from_slice(&m.image_id().to_le_bytes());
        out.push(m.kind().code());
        out.extend_from_slice(&(m.height() as u32).to_le_bytes());
        out.extend_from_slice(&(m.width() as u32).to_le_bytes());
        for v in m.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_map_archive(bytes: &[u8]) -> Result<Vec<SaliencyMap>> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let end = pos + n;
        let slice = bytes
            .get(pos..end)
            .ok_or_else(|| format_err!("map archive truncated at byte {pos}"))?;
        pos = end;
        Ok(slice)
    };
    if take(8)? != ARCHIVE_MAGIC {
        return Err(format_err!("not a map archive (bad magic)"));
    }
    let count = u32::from_le_bytes(take(4)?.try_into().unwrap());
    let mut maps = Vec::new();
    for _ in 0..count {
        let id = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let code = take(1)?[0];
        let kind =
            MapKind::from_code(code).ok_or_else(|| format_err!("unknown map kind code {code}"))?;
        let h = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let w = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let len = h
            .checked_mul(w)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| format_err!("map {id} is too large"))?;
        let values = take(len)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        maps.push(
            SaliencyMap::new(kind, id, h, w, values).map_err(|e| format_err!("map {id}: {e}"))?,
        );
    }
    if pos != bytes.len() {
        return Err(format_err!(
            "{} trailing bytes in map archive",
            bytes.len() - pos
        ));
    }
    Ok(maps)
}

pub fn write_map_archive(path: &Path, maps: &[SaliencyMap]) -> Result<()> {
    fs::write(path, encode_map_archive(maps))?;
    Ok(())
}

pub fn read_map_archive(path: &Path) -> Result<Vec<SaliencyMap>> {
    decode_map_archive(&fs::read(path)?)
}
