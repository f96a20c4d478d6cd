//! Brute-force reference implementations shared by the integration tests.
//! None of these call into the library's kernels.

#![allow(dead_code)]

use std::collections::VecDeque;

use contourreg::volume::{LabelVolume, VolumeGeometry};
use rand::Rng;

pub fn coords(i: usize, dims: [usize; 3]) -> [usize; 3] {
    [i % dims[0], (i / dims[0]) % dims[1], i / (dims[0] * dims[1])]
}

pub fn random_dims(rng: &mut impl Rng, max: usize) -> [usize; 3] {
    [rng.random_range(1..=max), rng.random_range(1..=max), rng.random_range(1..=max)]
}

/// Window max (or min) by looping over every neighbour offset.
pub fn window_extreme(data: &[f64], dims: [usize; 3], d: usize, max: bool) -> Vec<f64> {
    let d = d as isize;
    (0..data.len())
        .map(|i| {
            let [x, y, z] = coords(i, dims).map(|c| c as isize);
            let mut best = if max { f64::NEG_INFINITY } else { f64::INFINITY };
            for dz in -d..=d {
                for dy in -d..=d {
                    for dx in -d..=d {
                        let (a, b, c) = (x + dx, y + dy, z + dz);
                        if a < 0 || b < 0 || c < 0 {
                            continue;
                        }
                        let (a, b, c) = (a as usize, b as usize, c as usize);
                        if a >= dims[0] || b >= dims[1] || c >= dims[2] {
                            continue;
                        }
                        let v = data[a + dims[0] * (b + dims[1] * c)];
                        best = if max { best.max(v) } else { best.min(v) };
                    }
                }
            }
            best
        })
        .collect()
}

pub fn contour_oracle(data: &[f64], dims: [usize; 3], d: usize) -> Vec<f64> {
    let hi = window_extreme(data, dims, d, true);
    let lo = window_extreme(data, dims, d, false);
    hi.iter().zip(&lo).map(|(a, b)| a - b).collect()
}

/// Softmax from `p_c = 1 / sum_k exp(z_k - z_c)`, a different route from the
/// max-shift normalization.
pub fn softmax_oracle(z: &[f64], n: usize, classes: usize) -> Vec<f64> {
    let mut p = vec![0.0; z.len()];
    for v in 0..n {
        for c in 0..classes {
            let s: f64 = (0..classes).map(|k| (z[k * n + v] - z[c * n + v]).exp()).sum();
            p[c * n + v] = 1.0 / s;
        }
    }
    p
}

/// Soft Dice over foreground classes by explicit double loop over classes and voxels.
pub fn dice_oracle(p: &[f64], labels: &[u8], classes: usize, eps: f64) -> f64 {
    let n = labels.len();
    let mut acc = 0.0;
    for c in 1..classes {
        let (mut inter, mut ps, mut ys) = (0.0, 0.0, 0.0);
        for v in 0..n {
            let y = if labels[v] as usize == c { 1.0 } else { 0.0 };
            inter += p[c * n + v] * y;
            ps += p[c * n + v];
            ys += y;
        }
        acc += (2.0 * inter + eps) / (ps + ys + eps);
    }
    1.0 - acc / (classes - 1) as f64
}

/// Mean of `-ln p_y` with `p` taken from [`softmax_oracle`].
pub fn ce_oracle(z: &[f64], labels: &[u8], classes: usize) -> f64 {
    let n = labels.len();
    let mut total = 0.0;
    for v in 0..n {
        let t = labels[v] as usize;
        let s: f64 = (0..classes).map(|k| (z[k * n + v] - z[t * n + v]).exp()).sum();
        total += s.ln();
    }
    total / n as f64
}

pub fn physical(i: usize, dims: [usize; 3], spacing: [f64; 3]) -> [f64; 3] {
    let c = coords(i, dims);
    [c[0] as f64 * spacing[0], c[1] as f64 * spacing[1], c[2] as f64 * spacing[2]]
}

fn points(mask: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> Vec<[f64; 3]> {
    mask.iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| physical(i, dims, spacing))
        .collect()
}

fn nearest(p: [f64; 3], set: &[[f64; 3]]) -> f64 {
    set.iter()
        .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min)
}

/// All-pairs directed nearest distances from `a` to `b`.
pub fn directed(a: &[bool], b: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> Vec<f64> {
    let pb = points(b, dims, spacing);
    points(a, dims, spacing).into_iter().map(|p| nearest(p, &pb)).collect()
}

pub fn hd_oracle(a: &[bool], b: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> f64 {
    let ab = directed(a, b, dims, spacing);
    let ba = directed(b, a, dims, spacing);
    ab.iter().chain(&ba).fold(0.0, |m, &x| m.max(x))
}

pub fn avd_oracle(a: &[bool], b: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> f64 {
    let ab = directed(a, b, dims, spacing);
    let ba = directed(b, a, dims, spacing);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    (mean(&ab) + mean(&ba)) / 2.0
}

pub fn dsc_oracle(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(&x, &y)| x && y).count();
    let total = a.iter().filter(|&&x| x).count() + b.iter().filter(|&&x| x).count();
    if total == 0 {
        1.0
    } else {
        2.0 * inter as f64 / total as f64
    }
}

/// Breadth-first flood fill; returns the number of components.
pub fn bfs_components(mask: &[bool], dims: [usize; 3], full: bool) -> usize {
    let mut seen = vec![false; mask.len()];
    let mut count = 0;
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let [x, y, z] = coords(i, dims).map(|c| c as isize);
            for dz in -1isize..=1 {
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let steps = dx.abs() + dy.abs() + dz.abs();
                        if steps == 0 || (!full && steps > 1) {
                            continue;
                        }
                        let (a, b, c) = (x + dx, y + dy, z + dz);
                        if a < 0 || b < 0 || c < 0 {
                            continue;
                        }
                        let (a, b, c) = (a as usize, b as usize, c as usize);
                        if a >= dims[0] || b >= dims[1] || c >= dims[2] {
                            continue;
                        }
                        let j = a + dims[0] * (b + dims[1] * c);
                        if mask[j] && !seen[j] {
                            seen[j] = true;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
    }
    count
}

/// Nearest-rank percentile of unsorted data: the element of rank
/// `round(q/100 * (n-1))` in ascending order.
pub fn nearest_rank(data: &[f32], q: f64) -> f32 {
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let rank = (q / 100.0 * (sorted.len() - 1) as f64).round() as usize;
    sorted[rank]
}

pub fn random_labels(rng: &mut impl Rng, dims: [usize; 3], classes: u8) -> LabelVolume {
    let g = VolumeGeometry::isotropic(dims).unwrap();
    LabelVolume::new(g, classes, (0..g.len()).map(|_| rng.random_range(0..classes)).collect()).unwrap()
}

pub fn random_mask(rng: &mut impl Rng, len: usize, density: f64) -> Vec<bool> {
    (0..len).map(|_| rng.random_bool(density)).collect()
}
