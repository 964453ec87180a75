//! IDX files (the MNIST distribution format): big-endian header, u8 data.

use std::fs;
use std::path::Path;

use byteorder::{BigEndian, ByteOrder};

use super::infer::Dataset;
use super::layer::InputBinarization;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let len = self.rows * self.cols;
        &self.pixels[i * len..(i + 1) * len]
    }
}

fn header(bytes: &[u8], magic: u32, words: usize) -> Result<Vec<usize>> {
    if bytes.len() < 4 * words {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("truncated header, need {} bytes", 4 * words),
        });
    }
    let found = BigEndian::read_u32(&bytes[0..4]);
    if found != magic {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {found:#010x}, expected {magic:#010x}"),
        });
    }
    Ok((1..words)
        .map(|w| BigEndian::read_u32(&bytes[4 * w..4 * w + 4]) as usize)
        .collect())
}

fn check_len(bytes: &[u8], start: usize, len: usize) -> Result<()> {
    if bytes.len() != start + len {
        return Err(Error::Format {
            offset: bytes.len().min(start + len) as u64,
            message: format!(
                "expected {} data bytes after the header, found {}",
                len,
                bytes.len() - start
            ),
        });
    }
    Ok(())
}

pub fn parse_images(bytes: &[u8]) -> Result<IdxImages> {
    let dims = header(bytes, IMAGES_MAGIC, 4)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    check_len(bytes, 16, count * rows * cols)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let count = header(bytes, LABELS_MAGIC, 2)?[0];
    check_len(bytes, 8, count)?;
    Ok(bytes[8..].to_vec())
}

pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = vec![0u8; 16];
    BigEndian::write_u32(&mut out[0..4], IMAGES_MAGIC);
    BigEndian::write_u32(&mut out[4..8], images.count as u32);
    BigEndian::write_u32(&mut out[8..12], images.rows as u32);
    BigEndian::write_u32(&mut out[12..16], images.cols as u32);
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; 8];
    BigEndian::write_u32(&mut out[0..4], LABELS_MAGIC);
    BigEndian::write_u32(&mut out[4..8], labels.len() as u32);
    out.extend_from_slice(labels);
    out
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Format { offset, message } => Error::Format {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        e => e,
    })
}

pub fn read_images(path: &Path) -> Result<IdxImages> {
    with_path(path, parse_images(&fs::read(path)?))
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    with_path(path, parse_labels(&fs::read(path)?))
}

/// Binarizes pixels (scaled to `[0, 1]`) with `rule`, or around the
/// dataset mean when `rule` is `None`. Returns the rule used.
pub fn to_dataset(
    images: &IdxImages,
    labels: &[u8],
    rule: Option<InputBinarization>,
) -> Result<(Dataset, InputBinarization)> {
    if images.count != labels.len() {
        return Err(Error::DimensionMismatch {
            what: "image/label count",
            expected: images.count,
            found: labels.len(),
        });
    }
    let scaled: Vec<Vec<f32>> = (0..images.count)
        .map(|i| images.image(i).iter().map(|&p| p as f32 / 255.0).collect())
        .collect();
    let rule =
        rule.unwrap_or_else(|| InputBinarization::from_mean(scaled.iter().map(Vec::as_slice)));
    Ok((
        Dataset {
            inputs: scaled.iter().map(|s| rule.apply(s)).collect(),
            labels: labels.iter().map(|&l| l as usize).collect(),
        },
        rule,
    ))
}
