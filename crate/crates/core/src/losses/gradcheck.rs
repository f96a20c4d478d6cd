//! Central-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::terms::{cr_window_selection, softmax};
use super::{LogitField, LossConfig, LossReport};
use crate::error::{Error, Result};
use crate::volume::LabelVolume;

/// Denominator floor of [`relative_error`]. Central differences with `h = 1e-3`
/// on an O(1) loss carry ~1e-13 of round-off, so gradients below this floor are
/// compared in absolute terms.
pub const GRADCHECK_ABS_FLOOR: f64 = 1e-7;

/// `|a - b| / max(|a|, |b|, GRADCHECK_ABS_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRADCHECK_ABS_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Flat logit index of the worst coordinate.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// Coordinates compared.
    pub checked: usize,
    /// Coordinates redrawn because `x ± h` crossed a change of window argmax/argmin.
    pub redrawn: usize,
    pub step: f64,
}

/// Compares `loss`'s gradient against `(f(x + h e_i) - f(x - h e_i)) / 2h` on
/// `samples` coordinates drawn without replacement (all of them if fewer exist).
///
/// The contour term is piecewise smooth: its gradient jumps where a window's
/// argmax or argmin changes. When `alpha > 0`, a coordinate whose perturbation
/// changes any window selection is redrawn, since the difference quotient then
/// straddles a kink.
pub fn finite_diff_check<F>(
    loss: F,
    logits: &LogitField,
    y: &LabelVolume,
    cfg: &LossConfig,
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: Fn(&LogitField, &LabelVolume, &LossConfig) -> Result<(LossReport, Vec<f64>)>,
{
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let (_, grad) = loss(logits, y, cfg)?;
    let len = logits.data().len();
    if grad.len() != len {
        return Err(Error::InvalidArgument(format!(
            "gradient has {} entries, logits have {len}",
            grad.len()
        )));
    }
    let track_kinks = cfg.alpha > 0.0;
    let base_selection = track_kinks.then(|| cr_window_selection(&softmax(logits), cfg));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // draw a random order over all coordinates; walk it until enough clean ones are checked
    let order = sample(&mut rng, len, len).into_vec();
    let wanted = samples.min(len);

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
        redrawn: 0,
        step: h,
    };
    let mut shifted = logits.clone();
    for &i in &order {
        if report.checked == wanted {
            break;
        }
        let x = logits.data()[i];
        shifted.data_mut()[i] = x + h;
        let (plus, sel_plus) = eval(&loss, &shifted, y, cfg, track_kinks)?;
        shifted.data_mut()[i] = x - h;
        let (minus, sel_minus) = eval(&loss, &shifted, y, cfg, track_kinks)?;
        shifted.data_mut()[i] = x;

        if let Some(base) = &base_selection {
            if sel_plus.as_ref() != Some(base) || sel_minus.as_ref() != Some(base) {
                report.redrawn += 1;
                continue;
            }
        }
        let numeric = (plus - minus) / (2.0 * h);
        let err = relative_error(grad[i], numeric);
        if err > report.max_rel_error || report.checked == 0 {
            report.max_rel_error = err;
            report.worst_index = i;
            report.analytic = grad[i];
            report.numeric = numeric;
        }
        report.checked += 1;
    }
    Ok(report)
}

type Selection = (Vec<usize>, Vec<usize>);

fn eval<F>(
    loss: &F,
    logits: &LogitField,
    y: &LabelVolume,
    cfg: &LossConfig,
    track_kinks: bool,
) -> Result<(f64, Option<Selection>)>
where
    F: Fn(&LogitField, &LabelVolume, &LossConfig) -> Result<(LossReport, Vec<f64>)>,
{
    let (report, _) = loss(logits, y, cfg)?;
    let selection = track_kinks.then(|| cr_window_selection(&softmax(logits), cfg));
    Ok((report.total, selection))
}
