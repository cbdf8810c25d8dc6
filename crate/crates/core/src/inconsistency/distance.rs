use rayon::prelude::*;

use super::{InconsistencyError, UncertaintyModel, WarpedImage};
use crate::GrayImage;

/// Integer pixel offsets inside the gate `dᵀ Σ⁻¹ d < τ²`, nearest first.
pub fn gate_offsets(u: &UncertaintyModel) -> Vec<(isize, isize)> {
    let inv = u.sigma.try_inverse().unwrap_or_else(nalgebra::Matrix2::zeros);
    let rx = (u.tau2 * u.sigma[(0, 0)]).sqrt().ceil() as isize;
    let ry = (u.tau2 * u.sigma[(1, 1)]).sqrt().ceil() as isize;
    let mut out = Vec::new();
    for dy in -ry..=ry {
        for dx in -rx..=rx {
            let (fx, fy) = (dx as f64, dy as f64);
            let m = inv[(0, 0)] * fx * fx + (inv[(0, 1)] + inv[(1, 0)]) * fx * fy + inv[(1, 1)] * fy * fy;
            if m < u.tau2 {
                out.push((dx, dy));
            }
        }
    }
    out.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dy, dx));
    out
}

/// Per destination pixel, the smallest intensity difference to any valid
/// warped pixel inside its uncertainty gate. Invalid pixels get 0.
pub fn inconsistency_distance(
    dst: &GrayImage,
    warped: &WarpedImage,
    u: &UncertaintyModel,
) -> Result<GrayImage, InconsistencyError> {
    if dst.dimensions() != warped.image.dimensions() || warped.valid.len() != dst.data().len() {
        return Err(InconsistencyError::DimensionMismatch {
            expected: dst.dimensions(),
            found: warped.image.dimensions(),
        });
    }
    let (w, h) = dst.dimensions();
    let offsets = gate_offsets(u);
    let wimg = warped.image.data();
    let valid = &warped.valid;
    let mut out = vec![0u8; w * h];
    out.par_chunks_mut(w.max(1)).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let i = y * w + x;
            if !valid[i] {
                continue;
            }
            let v = dst.data()[i];
            let mut best = u8::MAX;
            for &(dx, dy) in &offsets {
                let (zx, zy) = (x as isize + dx, y as isize + dy);
                if zx < 0 || zy < 0 || zx >= w as isize || zy >= h as isize {
                    continue;
                }
                let j = zy as usize * w + zx as usize;
                if valid[j] {
                    best = best.min(v.abs_diff(wimg[j]));
                    if best == 0 {
                        break;
                    }
                }
            }
            *o = best;
        }
    });
    Ok(GrayImage::from_vec(w, h, out).expect("sized from destination"))
}
