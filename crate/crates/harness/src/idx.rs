//! Reader for the IDX containers used by MNIST, optionally gzip-compressed.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use lieopt_learn::Dataset;

use crate::error::{HarnessError, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const CLASSES: usize = 10;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out).map_err(|e| HarnessError::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(path: &Path, bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| HarnessError::Truncated { path: path.to_path_buf(), expected: at + 4, got: bytes.len() })
}

fn check_magic(path: &Path, bytes: &[u8], expected: u32) -> Result<()> {
    let got = be_u32(path, bytes, 0)?;
    if got == expected {
        Ok(())
    } else {
        Err(HarnessError::BadMagic { path: path.to_path_buf(), expected, got })
    }
}

/// Images as `(count, rows, cols, pixels)` with pixels scaled to `[0, 1]`.
pub fn read_images(path: &Path) -> Result<(usize, usize, usize, Vec<f64>)> {
    let bytes = read_bytes(path)?;
    check_magic(path, &bytes, IMAGE_MAGIC)?;
    let n = be_u32(path, &bytes, 4)? as usize;
    let rows = be_u32(path, &bytes, 8)? as usize;
    let cols = be_u32(path, &bytes, 12)? as usize;
    let expected = 16 + n * rows * cols;
    if bytes.len() < expected {
        return Err(HarnessError::Truncated { path: path.to_path_buf(), expected, got: bytes.len() });
    }
    let pixels = bytes[16..expected].iter().map(|&b| b as f64 / 255.0).collect();
    Ok((n, rows, cols, pixels))
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let bytes = read_bytes(path)?;
    check_magic(path, &bytes, LABEL_MAGIC)?;
    let n = be_u32(path, &bytes, 4)? as usize;
    let expected = 8 + n;
    if bytes.len() < expected {
        return Err(HarnessError::Truncated { path: path.to_path_buf(), expected, got: bytes.len() });
    }
    let labels: Vec<usize> = bytes[8..expected].iter().map(|&b| b as usize).collect();
    if let Some(&bad) = labels.iter().find(|&&l| l >= CLASSES) {
        return Err(HarnessError::Format { path: path.to_path_buf(), what: "label", detail: format!("{bad} is not a digit") });
    }
    Ok(labels)
}

pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let (n, rows, cols, pixels) = read_images(images)?;
    let labels = read_labels(labels)?;
    if labels.len() != n {
        return Err(HarnessError::CountMismatch { images: n, labels: labels.len() });
    }
    Ok(Dataset::new(pixels, labels, rows * cols, CLASSES))
}

/// Encodes images and labels in IDX form (used by tests and tooling).
pub fn encode_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let n = pixels.len() / (rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGE_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
