//! Volume data model.
//!
//! All volumes are stored flat in x-fastest order: the voxel `(x, y, z)` lives
//! at `x + nx * (y + ny * z)`.

mod clip;
mod io;

pub use clip::{percentile, percentile_clip, percentile_clip_with, PercentileMethod};
pub use io::{load_volume, save_volume, read_header, Dtype, VolumeHeader, VolumeRef, AnyVolume};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of label classes: background, kidney, tumor, artery, vein.
pub const DEFAULT_NUM_CLASSES: u8 = 5;

/// Class names in label order.
pub const CLASS_NAMES: [&str; 5] = ["background", "kidney", "tumor", "artery", "vein"];

pub const BACKGROUND: u8 = 0;
pub const KIDNEY: u8 = 1;
pub const TUMOR: u8 = 2;
pub const ARTERY: u8 = 3;
pub const VEIN: u8 = 4;

/// Human-readable name of a class index; falls back to `class<N>`.
pub fn class_name(class: usize) -> String {
    CLASS_NAMES
        .get(class)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("class{class}"))
}

/// Voxel grid dimensions and physical spacing in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeGeometry {
    dims: [usize; 3],
    spacing: [f64; 3],
}

// spacing is validated finite, so equality is reflexive
impl Eq for VolumeGeometry {}

impl VolumeGeometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidGeometry(format!("dims must be positive, got {dims:?}")));
        }
        if dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).is_none() {
            return Err(Error::InvalidGeometry(format!("dims {dims:?} overflow")));
        }
        if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "spacing must be finite and positive, got {spacing:?}"
            )));
        }
        Ok(Self { dims, spacing })
    }

    /// Unit spacing.
    pub fn isotropic(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, [1.0; 3])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    pub fn with_spacing(&self, spacing: [f64; 3]) -> Result<Self> {
        Self::new(self.dims, spacing)
    }

    pub(crate) fn ensure_same_dims(&self, other: &VolumeGeometry) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::GeometryMismatch {
                left: self.dims,
                right: other.dims,
            });
        }
        Ok(())
    }
}

/// Real-valued volume (CT intensities, probabilities, contour maps).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    geometry: VolumeGeometry,
    data: Vec<f32>,
}

impl ScalarVolume {
    pub fn new(geometry: VolumeGeometry, data: Vec<f32>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::InvalidGeometry(format!(
                "data has {} values, dims {:?} need {}",
                data.len(),
                geometry.dims(),
                geometry.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { geometry, data })
    }

    pub fn filled(geometry: VolumeGeometry, value: f32) -> Result<Self> {
        Self::new(geometry, vec![value; geometry.len()])
    }

    pub fn from_fn(geometry: VolumeGeometry, f: impl Fn(usize, usize, usize) -> f32) -> Result<Self> {
        let [nx, ny, nz] = geometry.dims();
        let mut data = Vec::with_capacity(geometry.len());
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    data.push(f(x, y, z));
                }
            }
        }
        Self::new(geometry, data)
    }

    pub fn geometry(&self) -> &VolumeGeometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.geometry.index(x, y, z)]
    }

    /// Elementwise map; fails if the result contains non-finite values.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        Self::new(self.geometry, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub(crate) fn from_parts_unchecked(geometry: VolumeGeometry, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), geometry.len());
        Self { geometry, data }
    }
}

/// Per-voxel class IDs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVolume {
    geometry: VolumeGeometry,
    num_classes: u8,
    data: Vec<u8>,
}

impl LabelVolume {
    pub fn new(geometry: VolumeGeometry, num_classes: u8, data: Vec<u8>) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        if data.len() != geometry.len() {
            return Err(Error::InvalidGeometry(format!(
                "data has {} labels, dims {:?} need {}",
                data.len(),
                geometry.dims(),
                geometry.len()
            )));
        }
        if let Some(index) = data.iter().position(|&v| v >= num_classes) {
            return Err(Error::LabelOutOfRange {
                index,
                value: data[index],
                num_classes,
            });
        }
        Ok(Self {
            geometry,
            num_classes,
            data,
        })
    }

    pub fn filled(geometry: VolumeGeometry, num_classes: u8, value: u8) -> Result<Self> {
        Self::new(geometry, num_classes, vec![value; geometry.len()])
    }

    pub fn geometry(&self) -> &VolumeGeometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims()
    }

    pub fn num_classes(&self) -> u8 {
        self.num_classes
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.data[self.geometry.index(x, y, z)]
    }

    /// Number of voxels carrying `class`.
    pub fn count(&self, class: u8) -> usize {
        self.data.iter().filter(|&&v| v == class).count()
    }

    /// Same labels with a different class count; fails if any label no longer fits.
    pub fn with_num_classes(&self, num_classes: u8) -> Result<Self> {
        Self::new(self.geometry, num_classes, self.data.clone())
    }
}
