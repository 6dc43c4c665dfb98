//! IDX files (the MNIST container format).
//!
//! Layout: a big-endian u32 magic (`0x00000803` for u8 images with three
//! dimensions, `0x00000801` for u8 labels), one big-endian u32 per dimension,
//! then the raw unsigned bytes. Files starting with the gzip magic `1f 8b` are
//! decompressed transparently.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use fedrad_core::data::LabeledDataset;
use fedrad_core::nn::RealMatrix;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Parsed image file: `count` images of `rows x cols` bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

/// Read a file, gunzipping it if it carries the gzip magic.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        return Ok(out);
    }
    Ok(raw)
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            offset,
            message: "truncated header".into(),
        })
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != expected {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            message: format!("bad magic 0x{magic:08x}, expected 0x{expected:08x}"),
        });
    }
    Ok(())
}

fn payload<'a>(bytes: &'a [u8], start: usize, len: usize, path: &Path) -> Result<&'a [u8]> {
    if bytes.len() < start + len {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: bytes.len(),
            message: format!("truncated data: need {} bytes, file has {}", start + len, bytes.len()),
        });
    }
    Ok(&bytes[start..start + len])
}

pub fn parse_images(bytes: &[u8], path: &Path) -> Result<IdxImages> {
    check_magic(bytes, IMAGES_MAGIC, path)?;
    let count = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    let pixels = payload(bytes, 16, count * rows * cols, path)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC, path)?;
    let count = be_u32(bytes, 4, path)? as usize;
    Ok(payload(bytes, 8, count, path)?.to_vec())
}

/// Images scaled to `[0, 1]` by `/255`, flattened row-major; labels as written.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let images = parse_images(&read_maybe_gz(images_path)?, images_path)?;
    let labels = parse_labels(&read_maybe_gz(labels_path)?, labels_path)?;
    if images.count != labels.len() {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            offset: 4,
            message: format!(
                "label count {} does not match image count {} in {}",
                labels.len(),
                images.count,
                images_path.display()
            ),
        });
    }
    let dim = images.rows * images.cols;
    let data: Vec<f64> = images.pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let class_count = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0).max(10);
    let inputs = RealMatrix::new(images.count, dim, data)?;
    Ok(LabeledDataset::new(
        inputs,
        labels.iter().map(|&l| l as usize).collect(),
        class_count,
    )?)
}

pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGES_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Write a dataset back as an IDX pair. Inputs are rounded to the nearest
/// byte after scaling by 255, so `/255` data round-trips exactly.
pub fn write_idx(
    dataset: &LabeledDataset,
    rows: usize,
    cols: usize,
    images_path: &Path,
    labels_path: &Path,
) -> Result<()> {
    if rows * cols != dataset.input_dim() {
        return Err(fedrad_core::Error::Shape(format!(
            "{rows}x{cols} images do not match input dim {}",
            dataset.input_dim()
        ))
        .into());
    }
    let images = IdxImages {
        count: dataset.len(),
        rows,
        cols,
        pixels: dataset
            .inputs()
            .as_slice()
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect(),
    };
    let labels: Vec<u8> = dataset.labels().iter().map(|&l| l as u8).collect();
    write_file(images_path, &encode_images(&images))?;
    write_file(labels_path, &encode_labels(&labels))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
