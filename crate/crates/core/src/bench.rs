//! Median wall-clock timing of the max-pool kernels.

use std::fmt;
use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::morphology::{maxpool_naive, maxpool_separable, WindowRadius};
use crate::volume::{ScalarVolume, VolumeGeometry};

pub const CSV_HEADER: &str = "impl,d,dims,median_ns";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Naive,
    Separable,
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kernel::Naive => "naive",
            Kernel::Separable => "separable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub kernel: Kernel,
    pub d: usize,
    pub dims: [usize; 3],
    pub median_ns: u128,
}

impl BenchRow {
    pub fn csv(&self) -> String {
        let [x, y, z] = self.dims;
        format!("{},{},{x}x{y}x{z},{}", self.kernel, self.d, self.median_ns)
    }
}

pub fn random_volume(dims: [usize; 3], seed: u64) -> Result<ScalarVolume> {
    let g = VolumeGeometry::isotropic(dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarVolume::new(g, (0..g.len()).map(|_| rng.random::<f32>()).collect())
}

fn median(mut samples: Vec<u128>) -> u128 {
    samples.sort_unstable();
    let m = samples.len() / 2;
    if samples.len() % 2 == 1 {
        samples[m]
    } else {
        (samples[m - 1] + samples[m]) / 2
    }
}

/// Times both kernels `reps` times per radius on one random volume.
pub fn bench_maxpool(dims: [usize; 3], radii: &[usize], reps: usize, seed: u64) -> Result<Vec<BenchRow>> {
    let vol = random_volume(dims, seed)?;
    let reps = reps.max(1);
    let mut rows = Vec::new();
    for &d in radii {
        for kernel in [Kernel::Naive, Kernel::Separable] {
            let samples = (0..reps)
                .map(|_| {
                    let start = Instant::now();
                    let out = match kernel {
                        Kernel::Naive => maxpool_naive(&vol, WindowRadius(d)),
                        Kernel::Separable => maxpool_separable(&vol, WindowRadius(d)),
                    };
                    black_box(out);
                    start.elapsed().as_nanos()
                })
                .collect();
            rows.push(BenchRow {
                kernel,
                d,
                dims,
                median_ns: median(samples),
            });
        }
    }
    Ok(rows)
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_both_kernels() {
        let rows = bench_maxpool([8, 8, 8], &[0, 1], 3, 0).unwrap();
        let csv = to_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let body: Vec<&str> = lines.collect();
        assert_eq!(body.len(), 4);
        assert!(body[0].starts_with("naive,0,8x8x8,"));
        assert!(body[1].starts_with("separable,0,8x8x8,"));
        assert!(body.iter().all(|l| l.split(',').count() == 4));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3, 1, 2]), 2);
        assert_eq!(median(vec![4, 1, 3, 2]), 2);
    }
}
