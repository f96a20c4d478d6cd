use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{LabelVolume, ScalarVolume, VolumeGeometry, BACKGROUND, DEFAULT_NUM_CLASSES, KIDNEY, TUMOR};

/// Empty voxels kept between a speckle and any other labelled voxel.
const SPECKLE_CLEARANCE: usize = 3;
const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

/// Synthetic kidney/tumor volume with isolated false-tumor speckles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub rng_seed: u64,
    pub organ_radius_vox: f64,
    pub tumor_radius_vox: f64,
    pub speckle_count: usize,
    /// Edge length of each cubic speckle.
    pub speckle_size_vox: usize,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            dims: [48, 48, 48],
            spacing: [1.0, 1.0, 1.0],
            rng_seed: 0,
            organ_radius_vox: 14.0,
            tumor_radius_vox: 8.0,
            speckle_count: 8,
            speckle_size_vox: 2,
        }
    }
}

impl PhantomSpec {
    pub fn with_seed(&self, rng_seed: u64) -> Self {
        Self {
            rng_seed,
            ..self.clone()
        }
    }

    pub fn geometry(&self) -> Result<VolumeGeometry> {
        VolumeGeometry::new(self.dims, self.spacing)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        let half_min = *self.dims.iter().min().expect("three dims") as f64 / 2.0;
        if !(self.organ_radius_vox > 0.0 && self.organ_radius_vox < half_min) {
            return Err(Error::InvalidGeometry(format!(
                "organ radius {} does not fit in dims {:?}",
                self.organ_radius_vox, self.dims
            )));
        }
        if !(self.tumor_radius_vox > 0.0 && self.tumor_radius_vox < self.organ_radius_vox) {
            return Err(Error::InvalidGeometry(format!(
                "tumor radius {} must be positive and below the organ radius {}",
                self.tumor_radius_vox, self.organ_radius_vox
            )));
        }
        if self.speckle_count > 0 && self.speckle_size_vox == 0 {
            return Err(Error::InvalidGeometry("speckle size must be positive".into()));
        }
        Ok(())
    }
}

/// Intensity volume, clean labels, and labels corrupted with speckles.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub image: ScalarVolume,
    pub clean: LabelVolume,
    pub corrupted: LabelVolume,
}

fn inside_ball(p: [usize; 3], center: [f64; 3], radius: f64) -> bool {
    let d2: f64 = (0..3).map(|a| (p[a] as f64 - center[a]).powi(2)).sum();
    d2 <= radius * radius
}

/// Builds the phantom: a spherical kidney at the volume center containing a
/// spherical tumor offset in a seeded random direction, plus `speckle_count`
/// tumor-labelled cubes in the background, each at least
/// [`SPECKLE_CLEARANCE`] voxels away from any other label.
pub fn make_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let g = spec.geometry()?;
    let [nx, ny, nz] = spec.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    let center = [nx as f64 / 2.0 - 0.5, ny as f64 / 2.0 - 0.5, nz as f64 / 2.0 - 0.5];
    let dir: [f64; 3] = UnitSphere.sample(&mut rng);
    let offset = 0.5 * (spec.organ_radius_vox - spec.tumor_radius_vox);
    let tumor_center = [
        center[0] + offset * dir[0],
        center[1] + offset * dir[1],
        center[2] + offset * dir[2],
    ];

    let mut clean = vec![BACKGROUND; g.len()];
    for (i, label) in clean.iter_mut().enumerate() {
        let p = g.coords(i);
        if inside_ball(p, tumor_center, spec.tumor_radius_vox) {
            *label = TUMOR;
        } else if inside_ball(p, center, spec.organ_radius_vox) {
            *label = KIDNEY;
        }
    }

    let mut corrupted = clean.clone();
    let s = spec.speckle_size_vox;
    for _ in 0..spec.speckle_count {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            if s + 2 > nx || s + 2 > ny || s + 2 > nz {
                break;
            }
            // keep one background voxel to every face of the volume
            let origin = [
                rng.random_range(1..=nx - s - 1),
                rng.random_range(1..=ny - s - 1),
                rng.random_range(1..=nz - s - 1),
            ];
            if region_is_clear(&corrupted, &g, origin, s, SPECKLE_CLEARANCE) {
                for z in origin[2]..origin[2] + s {
                    for y in origin[1]..origin[1] + s {
                        for x in origin[0]..origin[0] + s {
                            corrupted[g.index(x, y, z)] = TUMOR;
                        }
                    }
                }
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InvalidGeometry(format!(
                "could not place {} speckles of size {s} in dims {:?}",
                spec.speckle_count, spec.dims
            )));
        }
    }

    let noise = Normal::new(0.0, 15.0).expect("valid normal");
    let intensity = |l: u8| match l {
        TUMOR => 90.0,
        KIDNEY => 160.0,
        _ => -80.0,
    };
    let image_data = clean
        .iter()
        .map(|&l| (intensity(l) + noise.sample(&mut rng)) as f32)
        .collect();

    Ok(Phantom {
        image: ScalarVolume::new(g, image_data)?,
        clean: LabelVolume::new(g, DEFAULT_NUM_CLASSES, clean)?,
        corrupted: LabelVolume::new(g, DEFAULT_NUM_CLASSES, corrupted)?,
    })
}

/// True if the cube at `origin` grown by `clearance` holds only background.
fn region_is_clear(labels: &[u8], g: &VolumeGeometry, origin: [usize; 3], size: usize, clearance: usize) -> bool {
    let dims = g.dims();
    let lo: Vec<usize> = origin.iter().map(|&o| o.saturating_sub(clearance)).collect();
    let hi: Vec<usize> = (0..3).map(|a| (origin[a] + size + clearance).min(dims[a])).collect();
    for z in lo[2]..hi[2] {
        for y in lo[1]..hi[1] {
            for x in lo[0]..hi[0] {
                if labels[g.index(x, y, z)] != BACKGROUND {
                    return false;
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{connected_components, BinaryMask, Connectivity};

    #[test]
    fn no_speckles_means_clean_equals_corrupted() {
        let spec = PhantomSpec {
            speckle_count: 0,
            ..PhantomSpec::default()
        };
        let p = make_phantom(&spec).unwrap();
        assert_eq!(p.clean, p.corrupted);
        assert!(p.clean.count(TUMOR) > 0);
        assert!(p.clean.count(KIDNEY) > 0);
    }

    #[test]
    fn seeded_phantoms_are_identical() {
        let spec = PhantomSpec::default().with_seed(11);
        assert_eq!(make_phantom(&spec).unwrap(), make_phantom(&spec).unwrap());
        assert_ne!(make_phantom(&spec).unwrap(), make_phantom(&spec.with_seed(12)).unwrap());
    }

    #[test]
    fn speckles_are_separate_components() {
        for seed in 0..3 {
            let p = make_phantom(&PhantomSpec::default().with_seed(seed)).unwrap();
            let tumor = BinaryMask::from_labels(&p.corrupted, TUMOR);
            assert_eq!(connected_components(&tumor, Connectivity::TwentySix).count, 9);
            let clean = BinaryMask::from_labels(&p.clean, TUMOR);
            assert_eq!(connected_components(&clean, Connectivity::TwentySix).count, 1);
            assert_eq!(p.corrupted.count(TUMOR) - p.clean.count(TUMOR), 8 * 8);
        }
    }

    #[test]
    fn tumor_lies_inside_kidney() {
        let p = make_phantom(&PhantomSpec::default().with_seed(5)).unwrap();
        let g = *p.clean.geometry();
        // every tumor voxel touching background would mean the tumor leaks out
        for (i, &l) in p.clean.data().iter().enumerate() {
            if l != TUMOR {
                continue;
            }
            let [x, y, z] = g.coords(i);
            for (dx, dy, dz) in [(1, 0, 0), (0, 1, 0), (0, 0, 1)] {
                assert_ne!(p.clean.get(x + dx, y + dy, z + dz), BACKGROUND);
                assert_ne!(p.clean.get(x - dx, y - dy, z - dz), BACKGROUND);
            }
        }
    }

    #[test]
    fn impossible_specs_fail() {
        let too_big = PhantomSpec {
            organ_radius_vox: 30.0,
            ..PhantomSpec::default()
        };
        assert!(make_phantom(&too_big).is_err());
        let crowded = PhantomSpec {
            dims: [12, 12, 12],
            organ_radius_vox: 5.0,
            tumor_radius_vox: 2.0,
            speckle_count: 50,
            ..PhantomSpec::default()
        };
        assert!(make_phantom(&crowded).is_err());
    }
}
