//! Segmentation losses with analytic gradients.
//!
//! The objective is `dice + ce + alpha * cr`, where `cr` is the L2 norm of the
//! contour map (windowed max minus windowed min) of one class's softmax
//! probability. Every term is accumulated in f64 in a fixed order.
//!
//! Per-class fields (`LogitField`, `ProbField`, gradients) are stored
//! class-major: class `c` of voxel `v` lives at `c * N + v`.

mod gradcheck;
mod terms;
mod total;

pub use gradcheck::{finite_diff_check, relative_error, GradCheckReport, GRADCHECK_ABS_FLOOR};
pub use terms::{
    cr_loss, cr_window_selection, cross_entropy_loss, dice_loss, softmax, softmax_backward,
};
pub use total::{total_loss, LossReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphology::WindowRadius;
use crate::volume::{LabelVolume, VolumeGeometry, TUMOR};

/// Guard for the CR gradient denominator, `g / max(L_CR, CR_DELTA)`.
pub const CR_DELTA: f64 = 1e-12;

/// Pre-softmax scores, `num_classes` per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitField {
    geometry: VolumeGeometry,
    num_classes: usize,
    data: Vec<f64>,
}

impl LogitField {
    pub fn new(geometry: VolumeGeometry, num_classes: usize, data: Vec<f64>) -> Result<Self> {
        check_field_shape(&geometry, num_classes, data.len())?;
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            geometry,
            num_classes,
            data,
        })
    }

    pub fn zeros(geometry: VolumeGeometry, num_classes: usize) -> Result<Self> {
        Self::new(geometry, num_classes, vec![0.0; geometry.len() * num_classes])
    }

    /// Logits `scale` on the labelled class and 0 elsewhere.
    pub fn from_labels(labels: &LabelVolume, num_classes: usize, scale: f64) -> Result<Self> {
        let n = labels.geometry().len();
        let mut data = vec![0.0; n * num_classes];
        for (v, &c) in labels.data().iter().enumerate() {
            if c as usize >= num_classes {
                return Err(Error::LabelOutOfRange {
                    index: v,
                    value: c,
                    num_classes: num_classes as u8,
                });
            }
            data[c as usize * n + v] = scale;
        }
        Self::new(*labels.geometry(), num_classes, data)
    }

    pub fn geometry(&self) -> &VolumeGeometry {
        &self.geometry
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_voxels(&self) -> usize {
        self.geometry.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn class(&self, c: usize) -> &[f64] {
        let n = self.num_voxels();
        &self.data[c * n..(c + 1) * n]
    }

    /// Applies `update` in place; fails (leaving garbage) if a value goes non-finite.
    pub fn update(&mut self, update: impl Fn(usize, &mut f64)) -> Result<()> {
        for (i, v) in self.data.iter_mut().enumerate() {
            update(i, v);
        }
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    /// Per-voxel argmax class (first class wins ties).
    pub fn argmax_labels(&self) -> Result<LabelVolume> {
        let n = self.num_voxels();
        let labels = (0..n)
            .map(|v| {
                let mut best = 0;
                for c in 1..self.num_classes {
                    if self.data[c * n + v] > self.data[best * n + v] {
                        best = c;
                    }
                }
                best as u8
            })
            .collect();
        LabelVolume::new(self.geometry, self.num_classes as u8, labels)
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Per-voxel class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbField {
    geometry: VolumeGeometry,
    num_classes: usize,
    data: Vec<f64>,
}

impl ProbField {
    /// Checks ranges and that every voxel sums to 1 within 1e-6.
    pub fn new(geometry: VolumeGeometry, num_classes: usize, data: Vec<f64>) -> Result<Self> {
        check_field_shape(&geometry, num_classes, data.len())?;
        if let Some(index) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(format!(
                "probability {} at {index} outside [0, 1]",
                data[index]
            )));
        }
        let n = geometry.len();
        for v in 0..n {
            let sum: f64 = (0..num_classes).map(|c| data[c * n + v]).sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidArgument(format!(
                    "probabilities at voxel {v} sum to {sum}"
                )));
            }
        }
        Ok(Self {
            geometry,
            num_classes,
            data,
        })
    }

    /// Exact one-hot encoding of a label volume.
    pub fn one_hot(labels: &LabelVolume, num_classes: usize) -> Result<Self> {
        let n = labels.geometry().len();
        let mut data = vec![0.0; n * num_classes];
        for (v, &c) in labels.data().iter().enumerate() {
            if c as usize >= num_classes {
                return Err(Error::LabelOutOfRange {
                    index: v,
                    value: c,
                    num_classes: num_classes as u8,
                });
            }
            data[c as usize * n + v] = 1.0;
        }
        Self::new(*labels.geometry(), num_classes, data)
    }

    pub fn geometry(&self) -> &VolumeGeometry {
        &self.geometry
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_voxels(&self) -> usize {
        self.geometry.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn class(&self, c: usize) -> &[f64] {
        let n = self.num_voxels();
        &self.data[c * n..(c + 1) * n]
    }

    pub(crate) fn from_parts_unchecked(geometry: VolumeGeometry, num_classes: usize, data: Vec<f64>) -> Self {
        Self {
            geometry,
            num_classes,
            data,
        }
    }
}

fn check_field_shape(geometry: &VolumeGeometry, num_classes: usize, len: usize) -> Result<()> {
    if num_classes < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 classes, got {num_classes}"
        )));
    }
    if len != geometry.len() * num_classes {
        return Err(Error::InvalidGeometry(format!(
            "field has {len} values, expected {} x {}",
            num_classes,
            geometry.len()
        )));
    }
    Ok(())
}

fn default_alpha() -> f64 {
    1.0
}
fn default_d() -> usize {
    1
}
fn default_cr_class() -> usize {
    TUMOR as usize
}
fn default_dice_eps() -> f64 {
    1e-5
}
fn default_num_classes() -> usize {
    5
}

/// Weights and hyper-parameters of the composite loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    /// Weight of the contour term.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Contour window radius.
    #[serde(default = "default_d")]
    pub d: usize,
    /// Class whose probability is contour-regularized.
    #[serde(default = "default_cr_class")]
    pub cr_class: usize,
    #[serde(default = "default_dice_eps")]
    pub dice_eps: f64,
    #[serde(default = "default_num_classes")]
    pub num_classes: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            d: default_d(),
            cr_class: default_cr_class(),
            dice_eps: default_dice_eps(),
            num_classes: default_num_classes(),
        }
    }
}

impl LossConfig {
    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    pub fn radius(&self) -> WindowRadius {
        WindowRadius(self.d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 || self.num_classes > u8::MAX as usize {
            return Err(Error::InvalidArgument(format!(
                "num_classes must be in 2..=255, got {}",
                self.num_classes
            )));
        }
        if self.cr_class >= self.num_classes {
            return Err(Error::InvalidArgument(format!(
                "cr_class {} out of range for {} classes",
                self.cr_class, self.num_classes
            )));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.dice_eps.is_finite() && self.dice_eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dice_eps must be > 0, got {}",
                self.dice_eps
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_labels(geometry: &VolumeGeometry, num_classes: usize, labels: &LabelVolume) -> Result<()> {
    geometry.ensure_same_dims(labels.geometry())?;
    if let Some(index) = labels.data().iter().position(|&c| c as usize >= num_classes) {
        return Err(Error::LabelOutOfRange {
            index,
            value: labels.data()[index],
            num_classes: num_classes as u8,
        });
    }
    Ok(())
}
