use serde::{Deserialize, Serialize};

use super::terms::{cr_parts, cross_entropy_value, dice_parts, softmax_with_lse};
use super::{check_labels, LogitField, LossConfig};
use crate::error::{Error, Result};
use crate::par;
use crate::volume::LabelVolume;

/// Value of each loss term and of the weighted total. Serializes with keys
/// `dice`, `ce`, `cr`, `alpha`, `total` in that order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub dice: f64,
    pub ce: f64,
    pub cr: f64,
    pub alpha: f64,
    pub total: f64,
}

impl LossReport {
    pub fn new(dice: f64, ce: f64, cr: f64, alpha: f64) -> Self {
        Self {
            dice,
            ce,
            cr,
            alpha,
            total: dice + ce + alpha * cr,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.dice, self.ce, self.cr, self.total].iter().all(|v| v.is_finite())
    }
}

/// `dice + ce + alpha * cr` and its gradient with respect to the logits.
pub fn total_loss(logits: &LogitField, y: &LabelVolume, cfg: &LossConfig) -> Result<(LossReport, Vec<f64>)> {
    cfg.validate()?;
    if logits.num_classes() != cfg.num_classes {
        return Err(Error::InvalidArgument(format!(
            "logits have {} classes, config expects {}",
            logits.num_classes(),
            cfg.num_classes
        )));
    }
    check_labels(logits.geometry(), logits.num_classes(), y)?;

    let n = logits.num_voxels();
    let c_count = logits.num_classes();
    let labels = y.data();
    let (p, lse) = softmax_with_lse(logits);
    let probs = p.data();
    let (dice, slopes) = dice_parts(&p, y, cfg);
    let (cr, grad_cr) = cr_parts(&p, cfg);
    let ce = cross_entropy_value(logits, &lse, y);

    // sum_c p_c * dL/dp_c per voxel
    let cr_scale = cfg.alpha;
    let mut dot = vec![0.0; n];
    for (c, s) in slopes.iter().enumerate().skip(1) {
        for ((acc, &pc), &l) in dot.iter_mut().zip(p.class(c)).zip(labels) {
            *acc += pc * if l as usize == c { s.on } else { s.off };
        }
    }
    if cr_scale != 0.0 {
        for ((acc, &pt), &g) in dot.iter_mut().zip(p.class(cfg.cr_class)).zip(&grad_cr) {
            *acc += pt * cr_scale * g;
        }
    }
    let inv_n = 1.0 / n as f64;
    let mut grad = vec![0.0; probs.len()];
    for c in 0..c_count {
        let pc = p.class(c);
        let s = slopes[c];
        let with_cr = c == cfg.cr_class && cr_scale != 0.0;
        par::for_each_chunk_mut(&mut grad[c * n..(c + 1) * n], par::REDUCE_CHUNK, |k, out| {
            let base = k * par::REDUCE_CHUNK;
            for (j, g) in out.iter_mut().enumerate() {
                let v = base + j;
                let hit = labels[v] as usize == c;
                let mut slope = if hit { s.on } else { s.off };
                if with_cr {
                    slope += cr_scale * grad_cr[v];
                }
                let hot = if hit { 1.0 } else { 0.0 };
                *g = pc[v] * (slope - dot[v]) + (pc[v] - hot) * inv_n;
            }
        });
    }
    Ok((LossReport::new(dice, ce, cr, cfg.alpha), grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::VolumeGeometry;

    #[test]
    fn report_json_key_order() {
        let r = LossReport::new(0.25, 0.5, 2.0, 0.5);
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"dice":0.25,"ce":0.5,"cr":2.0,"alpha":0.5,"total":1.75}"#
        );
    }

    #[test]
    fn perfect_prediction_on_constant_labels() {
        let g = VolumeGeometry::isotropic([4, 4, 4]).unwrap();
        let y = LabelVolume::filled(g, 5, 2).unwrap();
        let z = LogitField::from_labels(&y, 5, 40.0).unwrap();
        let (r, _) = total_loss(&z, &y, &LossConfig::default()).unwrap();
        assert!(r.dice.abs() < 1e-4, "{r:?}");
        assert!(r.ce < 1e-15);
        assert_eq!(r.cr, 0.0);
    }

    #[test]
    fn class_count_must_match_config() {
        let g = VolumeGeometry::isotropic([2, 2, 2]).unwrap();
        let y = LabelVolume::filled(g, 3, 0).unwrap();
        let z = LogitField::zeros(g, 3).unwrap();
        assert!(total_loss(&z, &y, &LossConfig::default()).is_err());
    }
}
