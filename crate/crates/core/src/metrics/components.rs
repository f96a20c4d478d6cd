//! Connected-component labelling of binary masks.

use std::str::FromStr;

use super::BinaryMask;
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    /// Face neighbours only.
    Six,
    /// Face, edge and corner neighbours.
    #[default]
    TwentySix,
}

impl Connectivity {
    /// Neighbour offsets `(dx, dy, dz)` that precede a voxel in scan order.
    fn backward_offsets(self) -> Vec<[i64; 3]> {
        let mut offsets = Vec::new();
        for dz in -1i64..=0 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let before = dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0)));
                    if !before {
                        continue;
                    }
                    let manhattan = dx.abs() + dy.abs() + dz.abs();
                    if self == Connectivity::TwentySix || manhattan == 1 {
                        offsets.push([dx, dy, dz]);
                    }
                }
            }
        }
        offsets
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "6" => Ok(Self::Six),
            "26" => Ok(Self::TwentySix),
            other => Err(Error::InvalidArgument(format!("connectivity must be 6 or 26, got {other}"))),
        }
    }
}

/// Component labels: 0 is background, components are numbered `1..=count` in
/// the scan order of their first voxel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabels {
    pub count: usize,
    pub labels: Vec<u32>,
}

impl ComponentLabels {
    /// Voxel count of each component, indexed by `label - 1`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &l in &self.labels {
            if l > 0 {
                sizes[l as usize - 1] += 1;
            }
        }
        sizes
    }
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        let grand = parent[parent[i as usize] as usize];
        parent[i as usize] = grand;
        i = grand;
    }
    i
}

/// Two-pass union-find labelling.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> ComponentLabels {
    let g = mask.geometry();
    let [nx, ny, nz] = g.dims();
    let data = mask.data();
    let offsets = connectivity.backward_offsets();
    let mut parent: Vec<u32> = (0..data.len() as u32).collect();

    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let v = g.index(x, y, z);
                if !data[v] {
                    continue;
                }
                for &[dx, dy, dz] in &offsets {
                    let (qx, qy, qz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                    if qx < 0 || qy < 0 || qz < 0 || qx >= nx as i64 || qy >= ny as i64 {
                        continue;
                    }
                    let q = g.index(qx as usize, qy as usize, qz as usize);
                    if data[q] {
                        let (a, b) = (find(&mut parent, v as u32), find(&mut parent, q as u32));
                        if a != b {
                            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                            parent[hi as usize] = lo;
                        }
                    }
                }
            }
        }
    }

    let mut labels = vec![0u32; data.len()];
    let mut count = 0u32;
    for v in 0..data.len() {
        if !data[v] {
            continue;
        }
        let root = find(&mut parent, v as u32) as usize;
        // roots are the smallest index of their component, so they are met first
        if labels[root] == 0 {
            count += 1;
            labels[root] = count;
        }
        labels[v] = labels[root];
    }
    ComponentLabels {
        count: count as usize,
        labels,
    }
}
