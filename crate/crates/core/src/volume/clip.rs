//! Percentile-based intensity clipping.

use super::ScalarVolume;
use crate::error::{Error, Result};

/// How a percentile is read off the sorted sample.
///
/// Both methods place percentile `q` at fractional rank `q/100 * (n - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PercentileMethod {
    /// Value at the closest rank (halves round up). The bound is always a
    /// sample value, so clipping is idempotent.
    #[default]
    Nearest,
    /// Linear interpolation between the two closest ranks. Re-clipping can
    /// move the bounds inward when the bracketing samples straddle them.
    Linear,
}

impl std::str::FromStr for PercentileMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(Self::Nearest),
            "linear" => Ok(Self::Linear),
            other => Err(Error::InvalidArgument(format!(
                "unknown percentile method {other:?} (expected nearest or linear)"
            ))),
        }
    }
}

/// Percentile `q` (in percent) of an ascending, non-empty slice.
pub fn percentile(sorted: &[f32], q: f64, method: PercentileMethod) -> f32 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let rank = (q / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    match method {
        PercentileMethod::Nearest => sorted[rank.round() as usize],
        PercentileMethod::Linear => {
            let lo = rank.floor() as usize;
            let hi = rank.ceil() as usize;
            let frac = rank - lo as f64;
            let (a, b) = (sorted[lo] as f64, sorted[hi] as f64);
            (a + frac * (b - a)) as f32
        }
    }
}

/// Clamps every voxel to `[P_lo, P_hi]` using [`PercentileMethod::Nearest`].
pub fn percentile_clip(vol: &ScalarVolume, lo: f64, hi: f64) -> Result<ScalarVolume> {
    percentile_clip_with(vol, lo, hi, PercentileMethod::default())
}

pub fn percentile_clip_with(
    vol: &ScalarVolume,
    lo: f64,
    hi: f64,
    method: PercentileMethod,
) -> Result<ScalarVolume> {
    if !(lo.is_finite() && hi.is_finite() && (0.0..=100.0).contains(&lo) && (0.0..=100.0).contains(&hi))
    {
        return Err(Error::InvalidArgument(format!(
            "percentiles must lie in [0, 100], got lo={lo} hi={hi}"
        )));
    }
    if lo >= hi {
        return Err(Error::InvalidArgument(format!(
            "lower percentile {lo} must be below upper percentile {hi}"
        )));
    }
    let mut sorted = vol.data().to_vec();
    sorted.sort_unstable_by(f32::total_cmp);
    let p_lo = percentile(&sorted, lo, method);
    let p_hi = percentile(&sorted, hi, method);
    let data = vol.data().iter().map(|&v| v.clamp(p_lo, p_hi)).collect();
    Ok(ScalarVolume::from_parts_unchecked(*vol.geometry(), data))
}
