//! Binary netpbm output: P6 for colour images, P5 for grayscale maps.
//!
//! Headers are written on a single line (`P6 <w> <h> 255\n`), followed by the
//! raw 8-bit samples.

use std::fs;
use std::path::Path;

use crate::error::{format_err, shape_err, Result};
use crate::saliency::SaliencyMap;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    /// P6, three interleaved channels.
    Ppm,
    /// P5, one channel.
    Pgm,
}

fn encode(magic: &str, width: usize, height: usize, payload: &[u8]) -> Vec<u8> {
    let mut bytes = format!("{magic} {width} {height} 255\n").into_bytes();
    bytes.extend_from_slice(payload);
    bytes
}

/// `rgb` holds `width·height` interleaved RGB triples.
pub fn write_ppm(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    if rgb.len() != width * height * 3 {
        return Err(shape_err!(
            "{} bytes for a {width}x{height} RGB image",
            rgb.len()
        ));
    }
    fs::write(path, encode("P6", width, height, rgb))?;
    Ok(())
}

pub fn write_pgm(path: &Path, width: usize, height: usize, gray: &[u8]) -> Result<()> {
    if gray.len() != width * height {
        return Err(shape_err!(
            "{} bytes for a {width}x{height} gray image",
            gray.len()
        ));
    }
    fs::write(path, encode("P5", width, height, gray))?;
    Ok(())
}

fn to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a `C×H×W` image with values in `[0, 1]`; samples are rounded to
/// the nearest of 256 levels, so CIFAR bytes survive a load/export cycle.
pub fn export_image(image: &Tensor, path: &Path, format: ImageFormat) -> Result<()> {
    let [c, h, w] = *image.shape() else {
        return Err(shape_err!(
            "expected a CxHxW image, got {:?}",
            image.shape()
        ));
    };
    let data = image.data();
    let plane = h * w;
    match format {
        ImageFormat::Ppm => {
            if c != 3 {
                return Err(shape_err!("PPM export needs 3 channels, got {c}"));
            }
            let rgb: Vec<u8> = (0..plane)
                .flat_map(|p| (0..3).map(move |ch| to_byte(data[ch * plane + p])))
                .collect();
            write_ppm(path, w, h, &rgb)
        }
        ImageFormat::Pgm => {
            if c != 1 {
                return Err(shape_err!("PGM export needs 1 channel, got {c}"));
            }
            let gray: Vec<u8> = data.iter().map(|&v| to_byte(v)).collect();
            write_pgm(path, w, h, &gray)
        }
    }
}

/// Writes a saliency map through its display normalization.
pub fn export_map(map: &SaliencyMap, path: &Path) -> Result<()> {
    write_pgm(path, map.width(), map.height(), &map.to_display())
}

/// Parsed netpbm file: `(channels, width, height, samples)`.
pub fn read_netpbm(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format_err!("truncated netpbm header"));
        }
        fields.push(
            std::str::from_utf8(&bytes[start..pos])
                .unwrap_or("")
                .to_string(),
        );
    }
    // exactly one whitespace byte separates the header from the samples
    pos += 1;
    let channels = match fields[0].as_str() {
        "P6" => 3,
        "P5" => 1,
        other => return Err(format_err!("unsupported netpbm magic {other:?}")),
    };
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| format_err!("bad netpbm header field {s:?}"))
    };
    let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if maxval != 255 {
        return Err(format_err!(
            "only 8-bit netpbm is supported, got maxval {maxval}"
        ));
    }
    let payload = bytes.get(pos..).unwrap_or(&[]);
    if payload.len() != w * h * channels {
        return Err(format_err!(
            "expected {} samples, found {}",
            w * h * channels,
            payload.len()
        ));
    }
    Ok((channels, w, h, payload.to_vec()))
}
