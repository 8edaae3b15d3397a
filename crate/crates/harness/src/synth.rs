//! Small two-class datasets in the plane.

use std::f64::consts::PI;
use std::io::Write;

use lieopt_core::noise_rng;
use lieopt_learn::Dataset;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    GaussianBlobs,
    TwoMoons,
}

impl std::str::FromStr for SynthKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian_blobs" | "blobs" => Ok(SynthKind::GaussianBlobs),
            "two_moons" | "moons" => Ok(SynthKind::TwoMoons),
            other => Err(HarnessError::Invalid(format!("unknown synthetic dataset '{other}'"))),
        }
    }
}

/// `n` points alternating between the two classes.
pub fn synth_dataset(kind: SynthKind, n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(HarnessError::Invalid(format!("synthetic datasets need n >= 2, got {n}")));
    }
    let mut rng = noise_rng(seed, 0);
    let mut inputs = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let (x, y) = match kind {
            SynthKind::GaussianBlobs => {
                let c = if label == 0 { -2.5 } else { 2.5 };
                let zx: f64 = rng.sample(StandardNormal);
                let zy: f64 = rng.sample(StandardNormal);
                (c + 0.5 * zx, c + 0.5 * zy)
            }
            SynthKind::TwoMoons => {
                let t = rng.random_range(0.0..PI);
                let zx: f64 = rng.sample(StandardNormal);
                let zy: f64 = rng.sample(StandardNormal);
                let (x, y) = if label == 0 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
                (x + 0.1 * zx, y + 0.1 * zy)
            }
        };
        inputs.extend_from_slice(&[x, y]);
        labels.push(label);
    }
    Ok(Dataset::new(inputs, labels, 2, 2))
}

pub fn write_csv<W: Write>(data: &Dataset, mut w: W) -> std::io::Result<()> {
    let header: Vec<String> = (0..data.dim).map(|i| format!("x{i}")).collect();
    writeln!(w, "{},label", header.join(","))?;
    for i in 0..data.len() {
        let row: Vec<String> = data.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{},{}", row.join(","), data.labels[i])?;
    }
    Ok(())
}
