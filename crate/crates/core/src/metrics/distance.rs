//! Hausdorff-type distances between voxel-center point sets, in millimetres.

use super::BinaryMask;
use crate::error::{Error, Result};
use crate::grid;

/// Exact squared Euclidean distance (mm²) from every voxel center to the
/// nearest foreground voxel center of `mask`; `+inf` if the mask is empty.
///
/// Separable lower-envelope-of-parabolas transform, one pass per axis with
/// that axis's spacing.
pub fn squared_distance_transform(mask: &BinaryMask) -> Vec<f64> {
    let geometry = mask.geometry();
    let dims = geometry.dims();
    let spacing = geometry.spacing();
    let init: Vec<f64> = mask
        .data()
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();
    (0..3).fold(init, |field, axis| {
        let s2 = spacing[axis] * spacing[axis];
        grid::map_lines(&field, dims, axis, |line, out| envelope_1d(line, s2, out))
    })
}

/// 1D transform `out[q] = min_p s2 (q - p)^2 + f[p]`.
fn envelope_1d(f: &[f64], s2: f64, out: &mut [f64]) {
    let n = f.len();
    let mut sites: Vec<usize> = Vec::with_capacity(n);
    let mut bounds: Vec<f64> = Vec::with_capacity(n + 1);
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let fq = f[q] + s2 * (q * q) as f64;
        let mut start = f64::NEG_INFINITY;
        while let Some(&p) = sites.last() {
            let fp = f[p] + s2 * (p * p) as f64;
            let s = (fq - fp) / (2.0 * s2 * (q - p) as f64);
            if s <= *bounds.last().expect("one bound per site") {
                sites.pop();
                bounds.pop();
            } else {
                start = s;
                break;
            }
        }
        sites.push(q);
        bounds.push(start);
    }
    if sites.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while k + 1 < sites.len() && bounds[k + 1] < q as f64 {
            k += 1;
        }
        let p = sites[k];
        let dq = q.abs_diff(p) as f64;
        *o = s2 * dq * dq + f[p];
    }
}

/// Distances from each foreground voxel of `from` to the nearest voxel of `to`.
fn directed_distances(from: &BinaryMask, to: &BinaryMask) -> Vec<f64> {
    let field = squared_distance_transform(to);
    from.data()
        .iter()
        .zip(&field)
        .filter(|(&b, _)| b)
        .map(|(_, &d2)| d2.sqrt())
        .collect()
}

fn check_pair(a: &BinaryMask, b: &BinaryMask) -> Result<()> {
    a.geometry().ensure_same_dims(b.geometry())?;
    if a.geometry().spacing() != b.geometry().spacing() {
        return Err(Error::InvalidArgument("masks have different voxel spacing".into()));
    }
    if a.is_empty() {
        return Err(Error::EmptyMask("first mask has no foreground voxels"));
    }
    if b.is_empty() {
        return Err(Error::EmptyMask("second mask has no foreground voxels"));
    }
    Ok(())
}

/// Symmetric Hausdorff distance `max(h(A, B), h(B, A))`.
pub fn hausdorff(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    check_pair(a, b)?;
    let ab = directed_distances(a, b).into_iter().fold(0.0, f64::max);
    let ba = directed_distances(b, a).into_iter().fold(0.0, f64::max);
    Ok(ab.max(ba))
}

/// Average Hausdorff distance: the mean of the two directed mean
/// nearest-neighbour distances, `(mean_a d(a, B) + mean_b d(b, A)) / 2`.
pub fn avg_hausdorff(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    check_pair(a, b)?;
    let mean = |d: Vec<f64>| d.iter().sum::<f64>() / d.len() as f64;
    Ok(0.5 * (mean(directed_distances(a, b)) + mean(directed_distances(b, a))))
}
