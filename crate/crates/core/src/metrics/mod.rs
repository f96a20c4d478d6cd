//! Segmentation evaluation: DSC, Hausdorff distance (HD), average Hausdorff
//! distance (AVD) and connected-component counts.
//!
//! Point sets are the centers of foreground voxels, scaled by the voxel
//! spacing.

mod components;
mod distance;

pub use components::{connected_components, ComponentLabels, Connectivity};
pub use distance::{avg_hausdorff, hausdorff, squared_distance_transform};

use std::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::volume::{class_name, LabelVolume, VolumeGeometry};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    geometry: VolumeGeometry,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(geometry: VolumeGeometry, data: Vec<bool>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::InvalidGeometry(format!(
                "mask has {} voxels, dims {:?} need {}",
                data.len(),
                geometry.dims(),
                geometry.len()
            )));
        }
        Ok(Self { geometry, data })
    }

    /// Voxels labelled `class`.
    pub fn from_labels(labels: &LabelVolume, class: u8) -> Self {
        Self {
            geometry: *labels.geometry(),
            data: labels.data().iter().map(|&l| l == class).collect(),
        }
    }

    pub fn geometry(&self) -> &VolumeGeometry {
        &self.geometry
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }
}

/// Dice similarity `2|A ∩ B| / (|A| + |B|)`; 1.0 when both masks are empty.
pub fn dsc(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.geometry.ensure_same_dims(&b.geometry)?;
    let inter = a.data.iter().zip(&b.data).filter(|(&x, &y)| x && y).count();
    let total = a.count() + b.count();
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Metrics of one class. Distances are `None` when either mask is empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    #[serde(skip)]
    pub class: usize,
    #[serde(skip)]
    pub name: String,
    pub dsc: f64,
    pub hd_mm: Option<f64>,
    pub avd_mm: Option<f64>,
    /// Connected components of the predicted mask.
    pub components: usize,
}

impl ClassMetrics {
    pub fn evaluate(pred: &LabelVolume, truth: &LabelVolume, class: u8, connectivity: Connectivity) -> Result<Self> {
        pred.geometry().ensure_same_dims(truth.geometry())?;
        let a = BinaryMask::from_labels(pred, class);
        let b = BinaryMask::from_labels(truth, class);
        let (hd_mm, avd_mm) = if a.is_empty() || b.is_empty() {
            (None, None)
        } else {
            (Some(hausdorff(&a, &b)?), Some(avg_hausdorff(&a, &b)?))
        };
        Ok(Self {
            class: class as usize,
            name: class_name(class as usize),
            dsc: dsc(&a, &b)?,
            hd_mm,
            avd_mm,
            components: connected_components(&a, connectivity).count,
        })
    }
}

/// Per-class rows, serialized as `{"<class>": {"dsc", "hd_mm", "avd_mm", "components"}}`
/// in class order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub rows: Vec<ClassMetrics>,
}

impl MetricsReport {
    pub fn evaluate(
        pred: &LabelVolume,
        truth: &LabelVolume,
        classes: &[u8],
        connectivity: Connectivity,
    ) -> Result<Self> {
        let rows = classes
            .iter()
            .map(|&c| ClassMetrics::evaluate(pred, truth, c, connectivity))
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    pub fn get(&self, class: usize) -> Option<&ClassMetrics> {
        self.rows.iter().find(|r| r.class == class)
    }
}

impl Serialize for MetricsReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.rows.len()))?;
        for row in &self.rows {
            map.serialize_entry(&row.name, row)?;
        }
        map.end()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "undefined".into())
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12}{:>10}{:>11}{:>11}{:>12}", "", "DSC(%)", "HD(mm)", "AVD(mm)", "components")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<12}{:>10.2}{:>11}{:>11}{:>12}",
                r.name,
                100.0 * r.dsc,
                fmt_opt(r.hd_mm),
                fmt_opt(r.avd_mm),
                r.components
            )?;
        }
        Ok(())
    }
}
