//! Binary greymap (P5) images with 8-bit samples.

use std::path::Path;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| HarnessError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
        Self::decode(&bytes, path)
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |detail: String| HarnessError::Format { path: path.to_path_buf(), what: "PGM header", detail };
        let mut at = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            // skip whitespace and comments
            while at < bytes.len() && (bytes[at].is_ascii_whitespace() || bytes[at] == b'#') {
                if bytes[at] == b'#' {
                    while at < bytes.len() && bytes[at] != b'\n' {
                        at += 1;
                    }
                } else {
                    at += 1;
                }
            }
            let start = at;
            while at < bytes.len() && !bytes[at].is_ascii_whitespace() {
                at += 1;
            }
            if start == at {
                return Err(bad("unexpected end of header".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..at]).into_owned());
        }
        if fields[0] != "P5" {
            return Err(bad(format!("magic '{}' is not P5", fields[0])));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("'{s}' is not a number")));
        let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if maxval != 255 {
            return Err(bad(format!("only 8-bit images are supported, maxval {maxval}")));
        }
        at += 1; // single whitespace byte before the raster
        let expected = at + width * height;
        if bytes.len() < expected {
            return Err(HarnessError::Truncated { path: path.to_path_buf(), expected, got: bytes.len() });
        }
        Ok(Image { width, height, pixels: bytes[at..expected].to_vec() })
    }
}

/// Maps `[-m, m]` onto `[1, 255]` with zero at 128, `m = max |w|`. All-zero
/// input gives a uniform 128 image. Returns the pixels and `m`.
pub fn quantize_symmetric(w: &[f64]) -> (Vec<u8>, f64) {
    let m = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m == 0.0 || !m.is_finite() {
        return (vec![128; w.len()], 0.0);
    }
    let px = w.iter().map(|v| (128.0 + 127.0 * v / m).round().clamp(0.0, 255.0) as u8).collect();
    (px, m)
}

/// Width and height for `n` pixels: a square when possible, else one row.
pub fn grid(n: usize) -> (usize, usize) {
    let side = (n as f64).sqrt().round() as usize;
    if side * side == n {
        (side, side)
    } else {
        (n, 1)
    }
}
