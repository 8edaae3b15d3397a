//! Final training state as a little-endian binary blob.
//!
//! Layout:
//!
//! | bytes | field |
//! |-------|-------|
//! | 8     | magic `LIEOPTST` |
//! | 4     | format version (u32) |
//! | 1     | group kind: 0 additive, 1 multiplicative, 2 diagonal affine |
//! | 1     | mask mode: 0 none, 1 per weight, 2 per node |
//! | 2     | reserved, zero |
//! | 8     | parameter count `P` (u64) |
//! | 4     | number of layer sizes `L` (u32) |
//! | 8 L   | layer sizes (u64 each) |
//! | 8 P   | group payload (f64): translation or scales; for the affine group the scales are followed by a further `8 P` bytes of shifts |
//! | P     | mask payload: one signed byte per parameter, `+1` or `-1` |

use std::fmt::Write as _;
use std::path::Path;

use lieopt_core::{GroupElement, GroupKind};
use lieopt_learn::net::{MaskMode, Mlp, SignMask};

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 8] = b"LIEOPTST";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SavedState {
    pub g: GroupElement,
    pub mask: SignMask,
    pub layers: Vec<usize>,
}

fn kind_code(k: GroupKind) -> u8 {
    match k {
        GroupKind::Additive => 0,
        GroupKind::Multiplicative => 1,
        GroupKind::DiagAffine => 2,
    }
}

fn mode_code(m: MaskMode) -> u8 {
    match m {
        MaskMode::None => 0,
        MaskMode::PerWeight => 1,
        MaskMode::PerNode => 2,
    }
}

impl SavedState {
    pub fn net(&self) -> Result<Mlp> {
        Ok(Mlp::new(&self.layers)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = self.g.dim();
        let mut out = Vec::with_capacity(64 + 17 * p);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(kind_code(self.g.kind()));
        out.push(mode_code(self.mask.mode()));
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&(p as u64).to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for &s in &self.layers {
            out.extend_from_slice(&(s as u64).to_le_bytes());
        }
        let mut put = |v: &[f64]| v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        match &self.g {
            GroupElement::Additive(v) | GroupElement::Multiplicative(v) => put(v),
            GroupElement::DiagAffine { scale, shift } => {
                put(scale);
                put(shift);
            }
        }
        out.extend(self.mask.signs().iter().map(|&s| (s as i8) as u8));
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut cur = Cursor { bytes, at: 0, path };
        if cur.take(8)? != MAGIC {
            let got = u32::from_be_bytes(bytes.get(..4).unwrap_or(&[0; 4]).try_into().expect("4 bytes"));
            return Err(HarnessError::BadMagic { path: path.to_path_buf(), expected: u32::from_be_bytes(*b"LIEO"), got });
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(cur.format("version", format!("unsupported version {version}")));
        }
        let kind = match cur.take(1)?[0] {
            0 => GroupKind::Additive,
            1 => GroupKind::Multiplicative,
            2 => GroupKind::DiagAffine,
            k => return Err(cur.format("group kind", format!("unknown code {k}"))),
        };
        let mode = match cur.take(1)?[0] {
            0 => MaskMode::None,
            1 => MaskMode::PerWeight,
            2 => MaskMode::PerNode,
            m => return Err(cur.format("mask mode", format!("unknown code {m}"))),
        };
        cur.take(2)?;
        let p = cur.u64()? as usize;
        let nl = cur.u32()? as usize;
        let layers = (0..nl).map(|_| cur.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let g = match kind {
            GroupKind::Additive => GroupElement::additive(cur.f64s(p)?)?,
            GroupKind::Multiplicative => GroupElement::multiplicative(cur.f64s(p)?)?,
            GroupKind::DiagAffine => {
                let scale = cur.f64s(p)?;
                GroupElement::diag_affine(scale, cur.f64s(p)?)?
            }
        };
        let signs = cur.take(p)?.iter().map(|&b| (b as i8) as f64).collect();
        let mask = SignMask::from_signs(mode, signs)?;
        if cur.at != bytes.len() {
            return Err(cur.format("trailer", format!("{} unexpected bytes", bytes.len() - cur.at)));
        }
        let state = SavedState { g, mask, layers };
        let net = state.net()?;
        if net.num_params() != p {
            return Err(HarnessError::Format {
                path: path.to_path_buf(),
                what: "layer sizes",
                detail: format!("{:?} imply {} parameters, payload has {p}", state.layers, net.num_params()),
            });
        }
        Ok(state)
    }

    /// Human-readable summary written next to the blob.
    pub fn sidecar(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "format = LIEOPTST v{VERSION} (little-endian)");
        let _ = writeln!(s, "group = {}", self.g.kind());
        let _ = writeln!(s, "parameters = {}", self.g.dim());
        let layers: Vec<String> = self.layers.iter().map(|l| l.to_string()).collect();
        let _ = writeln!(s, "layers = {}", layers.join(","));
        let _ = writeln!(s, "mask = {}", self.mask.mode().name());
        let negative = self.mask.signs().iter().filter(|&&v| v < 0.0).count();
        let _ = writeln!(s, "negative_signs = {negative}");
        let stats = |v: &[f64]| {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
            format!("min={lo:e} max={hi:e} mean={mean:e}")
        };
        match &self.g {
            GroupElement::Additive(v) => {
                let _ = writeln!(s, "translation: {}", stats(v));
            }
            GroupElement::Multiplicative(v) => {
                let _ = writeln!(s, "scale: {}", stats(v));
            }
            GroupElement::DiagAffine { scale, shift } => {
                let _ = writeln!(s, "scale: {}", stats(scale));
                let _ = writeln!(s, "shift: {}", stats(shift));
            }
        }
        s
    }

    /// Writes `path` and `path.txt`.
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| HarnessError::io(path, e))?;
        let side = sidecar_path(path);
        std::fs::write(&side, self.sidecar()).map_err(|e| HarnessError::io(side, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".txt");
    s.into()
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at + n;
        if end > self.bytes.len() {
            return Err(HarnessError::Truncated { path: self.path.to_path_buf(), expected: end, got: self.bytes.len() });
        }
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self.take(8 * n)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    fn format(&self, what: &'static str, detail: String) -> HarnessError {
        HarnessError::Format { path: self.path.to_path_buf(), what, detail }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lieopt_learn::net::{init_params, InitOptions};

    #[test]
    fn round_trips_every_kind() {
        let net = Mlp::new(&[3, 2, 2]).unwrap();
        for (kind, mode) in [
            (GroupKind::Additive, MaskMode::None),
            (GroupKind::Multiplicative, MaskMode::PerNode),
            (GroupKind::DiagAffine, MaskMode::None),
        ] {
            let (g, mask) = init_params(&net, mode, kind, 3, InitOptions::default()).unwrap();
            let s = SavedState { g, mask, layers: net.sizes().to_vec() };
            let bytes = s.to_bytes();
            assert_eq!(&bytes[..8], MAGIC);
            assert_eq!(SavedState::from_bytes(&bytes, Path::new("x")).unwrap(), s);
            assert!(s.sidecar().contains(&format!("group = {kind}")));
        }
    }

    #[test]
    fn rejects_damage() {
        let net = Mlp::new(&[2, 2]).unwrap();
        let (g, mask) = init_params(&net, MaskMode::PerWeight, GroupKind::Multiplicative, 1, InitOptions::default()).unwrap();
        let bytes = SavedState { g, mask, layers: vec![2, 2] }.to_bytes();
        let p = Path::new("x");
        assert!(matches!(SavedState::from_bytes(&bytes[..bytes.len() - 1], p), Err(HarnessError::Truncated { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(SavedState::from_bytes(&bad, p), Err(HarnessError::BadMagic { .. })));
        let mut bad = bytes.clone();
        bad[12] = 7;
        assert!(matches!(SavedState::from_bytes(&bad, p), Err(HarnessError::Format { .. })));
        let mut long = bytes;
        long.push(0);
        assert!(SavedState::from_bytes(&long, p).is_err());
    }
}
