//! First-layer filters as greymap images, ranked by activation on a probe.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lieopt_core::GroupElement;

use crate::error::{HarnessError, Result};
use crate::pgm::{grid, quantize_symmetric, Image};
use crate::state::SavedState;

/// Location parameters of the variational family: the translation, the
/// scales, or the affine shift.
pub fn point_estimate(g: &GroupElement) -> &[f64] {
    match g {
        GroupElement::Additive(v) | GroupElement::Multiplicative(v) => v,
        GroupElement::DiagAffine { shift, .. } => shift,
    }
}

/// Hidden units of the first layer sorted by `tanh(probe . w + bias)`,
/// largest first, with their effective incoming weights.
pub fn ranked_filters(state: &SavedState, probe: &[f64]) -> Result<Vec<(usize, f64, Vec<f64>)>> {
    let net = state.net()?;
    let layer = *net.layer(0)?;
    if probe.len() != layer.fan_in {
        return Err(HarnessError::Invalid(format!("probe has {} values, layer expects {}", probe.len(), layer.fan_in)));
    }
    let w = state.mask.apply(point_estimate(&state.g));
    let weights = &w[layer.weight_range()];
    let biases = &w[layer.bias_range()];
    let mut units: Vec<(usize, f64, Vec<f64>)> = (0..layer.fan_out)
        .map(|o| {
            let filter: Vec<f64> = (0..layer.fan_in).map(|j| weights[j * layer.fan_out + o]).collect();
            let pre: f64 = filter.iter().zip(probe).map(|(a, b)| a * b).sum::<f64>() + biases[o];
            (o, pre.tanh(), filter)
        })
        .collect();
    units.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(units)
}

/// Writes the `count` highest-ranked filters and `bounds.txt`. Returns the
/// image paths in rank order.
pub fn export_filters(state: &SavedState, probe: &[f64], count: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let ranked = ranked_filters(state, probe)?;
    let mut bounds = String::from("# file unit activation lo hi (pixel = 128 + 127 * w / hi)\n");
    let mut paths = Vec::new();
    for (rank, (unit, act, filter)) in ranked.iter().take(count).enumerate() {
        let (width, height) = grid(filter.len());
        let (pixels, m) = quantize_symmetric(filter);
        let name = format!("filter_{rank:03}_unit{unit}.pgm");
        let path = dir.join(&name);
        Image { width, height, pixels }.write(&path)?;
        let _ = writeln!(bounds, "{name} {unit} {act:.6} {:e} {:e}", -m, m);
        paths.push(path);
    }
    let bpath = dir.join("bounds.txt");
    std::fs::write(&bpath, bounds).map_err(|e| HarnessError::io(&bpath, e))?;
    Ok(paths)
}
